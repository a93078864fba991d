#pragma once

// Dense ReLU multilayer perceptron with hand-derived reverse-mode gradients
// for both the parameters and the input.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "trust/error.hpp"
#include "trust/matrix.hpp"

namespace trust {

using Rng = std::mt19937_64;

struct MlpConfig {
  /// Input dim, hidden dims..., output dim.
  std::vector<std::size_t> layer_dims;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (layer_dims.size() < 3) {
      throw ConfigError("layer_dims needs input, at least one hidden and an output dimension");
    }
    for (auto d : layer_dims) {
      if (d == 0) throw ConfigError("layer dimensions must be >= 1");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw ConfigError("dropout_rate must lie in [0, 1)");
    }
  }
};

struct Mlp {
  MlpConfig config;
  std::vector<Matrix> weights;  // layer l maps dims[l] -> dims[l+1]
  std::vector<Vector> biases;

  std::size_t num_layers() const noexcept { return weights.size(); }
  std::size_t input_dim() const { return config.layer_dims.front(); }
  std::size_t output_dim() const { return config.layer_dims.back(); }
  std::size_t last_hidden() const noexcept { return num_layers() - 1; }

  /// He-uniform weights in ±sqrt(6 / fan_in), zero biases.
  static Mlp init(const MlpConfig& cfg) {
    cfg.validate();
    Mlp m;
    m.config = cfg;
    Rng rng(cfg.seed);
    for (std::size_t l = 0; l + 1 < cfg.layer_dims.size(); ++l) {
      const auto fan_in = cfg.layer_dims[l];
      const auto fan_out = cfg.layer_dims[l + 1];
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      std::uniform_real_distribution<double> u(-limit, limit);
      Matrix w(fan_out, fan_in);
      for (auto& v : w.values()) v = u(rng);
      m.weights.push_back(std::move(w));
      m.biases.emplace_back(fan_out, 0.0);
    }
    return m;
  }

  void validate() const {
    config.validate();
    if (weights.size() + 1 != config.layer_dims.size() || biases.size() != weights.size()) {
      throw ShapeError("layer count does not match layer_dims");
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l].rows() != config.layer_dims[l + 1] ||
          weights[l].cols() != config.layer_dims[l] ||
          biases[l].size() != config.layer_dims[l + 1]) {
        throw ShapeError("parameter shape mismatch at layer " + std::to_string(l));
      }
    }
  }

  std::vector<std::span<double>> parameter_blocks() {
    std::vector<std::span<double>> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.emplace_back(weights[l].values());
      out.emplace_back(biases[l]);
    }
    return out;
  }
};

enum class Pass { deterministic, stochastic };

/// Per-layer record of one forward pass. activations[0] is the input,
/// activations[1..L-1] are hidden post-ReLU (dropout-adjusted in stochastic
/// mode) and activations[L] holds the raw logits. pre_activations[l] is z_l
/// for l >= 1; index 0 is unused.
struct ForwardTrace {
  std::vector<Vector> pre_activations;
  std::vector<Vector> activations;
  std::vector<std::vector<std::uint8_t>> dropout_masks;  // empty in deterministic mode
  double keep_scale = 1.0;

  std::span<const double> logits() const { return activations.back(); }
};

/// Runs the network on x, reusing the buffers already held by `trace`.
inline void forward(const Mlp& model, std::span<const double> x, ForwardTrace& trace,
                    Pass pass = Pass::deterministic, Rng* rng = nullptr) {
  require_size(x.size(), model.input_dim(), "forward input");
  const std::size_t layers = model.num_layers();
  const bool drop = pass == Pass::stochastic && model.config.dropout_rate > 0.0;
  if (drop && rng == nullptr) throw ConfigError("stochastic forward needs a random stream");

  trace.pre_activations.resize(layers + 1);
  trace.activations.resize(layers + 1);
  trace.activations[0].assign(x.begin(), x.end());
  if (drop) {
    trace.dropout_masks.resize(layers + 1);
    trace.keep_scale = 1.0 / (1.0 - model.config.dropout_rate);
  } else {
    trace.dropout_masks.clear();
    trace.keep_scale = 1.0;
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t l = 1; l <= layers; ++l) {
    const auto& w = model.weights[l - 1];
    auto& z = trace.pre_activations[l];
    auto& a = trace.activations[l];
    z.resize(w.rows());
    affine(w, trace.activations[l - 1], model.biases[l - 1], z);
    if (l == layers) {
      a = z;
      break;
    }
    a.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
    if (drop) {
      auto& mask = trace.dropout_masks[l];
      mask.resize(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        mask[i] = unit(*rng) >= model.config.dropout_rate ? 1 : 0;
        a[i] = mask[i] ? a[i] * trace.keep_scale : 0.0;
      }
    }
  }
}

inline ForwardTrace forward(const Mlp& model, std::span<const double> x,
                            Pass pass = Pass::deterministic, Rng* rng = nullptr) {
  ForwardTrace trace;
  forward(model, x, trace, pass, rng);
  return trace;
}

/// Post-activation vector of `layer`; layer 0 is the input itself and
/// num_layers()-1 the last hidden layer.
inline std::span<const double> feature(const ForwardTrace& trace, std::size_t layer) {
  if (trace.activations.size() < 2 || layer >= trace.activations.size() - 1) {
    throw IndexError("feature layer " + std::to_string(layer) + " out of range");
  }
  return trace.activations[layer];
}

inline void check_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw DomainError("temperature must be a positive finite number");
  }
}

/// softmax(logits / T), max-subtracted.
inline Vector softmax_t(std::span<const double> logits, double temperature = 1.0) {
  check_temperature(temperature);
  if (logits.empty()) throw ShapeError("softmax of empty vector");
  Vector p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = logits[i] / temperature;
  const double mx = p[argmax(p)];
  double sum = 0.0;
  for (auto& v : p) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : p) v /= sum;
  return p;
}

/// -log softmax_t(logits, T)[target], computed through log-sum-exp.
inline double cross_entropy_t(std::span<const double> logits, std::size_t target,
                              double temperature = 1.0) {
  check_temperature(temperature);
  if (target >= logits.size()) {
    throw IndexError("target class " + std::to_string(target) + " out of range");
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v / temperature);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v / temperature - mx);
  // Clamp tiny negative rounding without masking NaN.
  const double loss = mx + std::log(sum) - logits[target] / temperature;
  return loss < 0.0 ? 0.0 : loss;
}

/// Gradients with the same block layout as an Mlp, plus the input gradient.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Vector input;

  static Gradients zeros_like(const Mlp& model) {
    Gradients g;
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
      g.weights.emplace_back(model.weights[l].rows(), model.weights[l].cols());
      g.biases.emplace_back(model.biases[l].size(), 0.0);
    }
    g.input.assign(model.input_dim(), 0.0);
    return g;
  }

  void scale(double s) {
    for (auto& w : weights) {
      for (auto& v : w.values()) v *= s;
    }
    for (auto& b : biases) {
      for (auto& v : b) v *= s;
    }
    for (auto& v : input) v *= s;
  }

  std::vector<std::span<const double>> blocks() const {
    std::vector<std::span<const double>> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
      out.emplace_back(weights[l].values());
      out.emplace_back(biases[l]);
    }
    return out;
  }
};

enum class GradientParts { all, input_only };

namespace detail {

inline void check_trace(const Mlp& model, const ForwardTrace& trace) {
  const std::size_t layers = model.num_layers();
  if (trace.activations.size() != layers + 1 || trace.pre_activations.size() != layers + 1) {
    throw ShapeError("forward trace does not belong to this model");
  }
  for (std::size_t l = 0; l <= layers; ++l) {
    if (trace.activations[l].size() != model.config.layer_dims[l]) {
      throw ShapeError("forward trace layer " + std::to_string(l) + " has stale shape");
    }
  }
}

}  // namespace detail

/// Reverse pass from an arbitrary gradient on the logits. Parameter
/// gradients are accumulated (+=) into `out`; the input gradient is
/// overwritten.
inline void backpropagate(const Mlp& model, const ForwardTrace& trace,
                          std::span<const double> logit_grad, Gradients& out,
                          GradientParts parts = GradientParts::all) {
  detail::check_trace(model, trace);
  require_size(logit_grad.size(), model.output_dim(), "logit gradient");
  const bool want_params = parts == GradientParts::all;
  if (want_params && (out.weights.size() != model.num_layers() ||
                      out.biases.size() != model.num_layers())) {
    throw ShapeError("gradient buffer does not match model");
  }

  Vector delta(logit_grad.begin(), logit_grad.end());
  Vector upstream;
  for (std::size_t l = model.num_layers(); l >= 1; --l) {
    const auto& w = model.weights[l - 1];
    const auto& a_prev = trace.activations[l - 1];
    if (want_params) {
      auto& gw = out.weights[l - 1];
      auto& gb = out.biases[l - 1];
      for (std::size_t r = 0; r < w.rows(); ++r) {
        const double d = delta[r];
        gb[r] += d;
        if (d == 0.0) continue;
        auto row = gw.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += d * a_prev[c];
      }
    }
    upstream.resize(w.cols());
    transpose_multiply(w, delta, upstream);
    if (l == 1) break;
    // Through ReLU (and dropout mask) of hidden layer l-1.
    const auto& z = trace.pre_activations[l - 1];
    const bool masked = !trace.dropout_masks.empty();
    for (std::size_t i = 0; i < upstream.size(); ++i) {
      double g = z[i] > 0.0 ? upstream[i] : 0.0;
      if (masked) g = trace.dropout_masks[l - 1][i] ? g * trace.keep_scale : 0.0;
      upstream[i] = g;
    }
    delta.swap(upstream);
  }
  out.input = std::move(upstream);
}

/// Exact gradients of cross_entropy_t(logits, target, T).
inline Gradients backward(const Mlp& model, const ForwardTrace& trace, std::size_t target,
                          double temperature = 1.0, GradientParts parts = GradientParts::all) {
  detail::check_trace(model, trace);
  if (target >= model.output_dim()) {
    throw IndexError("target class " + std::to_string(target) + " out of range");
  }
  auto dlogits = softmax_t(trace.logits(), temperature);
  dlogits[target] -= 1.0;
  for (auto& v : dlogits) v /= temperature;
  Gradients g = parts == GradientParts::all ? Gradients::zeros_like(model) : Gradients{};
  backpropagate(model, trace, dlogits, g, parts);
  return g;
}

/// Adam optimizer state for a fixed list of parameter blocks.
struct AdamState {
  std::vector<Vector> first_moment;
  std::vector<Vector> second_moment;
  std::size_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(const std::vector<std::size_t>& block_sizes) {
    for (auto n : block_sizes) {
      first_moment.emplace_back(n, 0.0);
      second_moment.emplace_back(n, 0.0);
    }
  }

  template <typename Blocks>
  static AdamState for_blocks(const Blocks& blocks) {
    std::vector<std::size_t> sizes;
    for (const auto& b : blocks) sizes.push_back(b.size());
    return AdamState(sizes);
  }
};

/// One bias-corrected Adam update, in place.
inline void adam_step(AdamState& state, const std::vector<std::span<double>>& params,
                      const std::vector<std::span<const double>>& grads, double lr) {
  if (params.size() != state.first_moment.size() || grads.size() != params.size()) {
    throw ShapeError("adam: block count mismatch");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    require_size(params[b].size(), state.first_moment[b].size(), "adam parameter block");
    require_size(grads[b].size(), params[b].size(), "adam gradient block");
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    const auto g = grads[b];
    auto p = params[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

inline void adam_step(AdamState& state, std::span<double> param, std::span<const double> grad,
                      double lr) {
  adam_step(state, std::vector<std::span<double>>{param},
            std::vector<std::span<const double>>{grad}, lr);
}

}  // namespace trust

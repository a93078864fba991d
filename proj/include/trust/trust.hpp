#pragma once

// Test-time uncertainty score: optimize a sparse input perturbation that
// drives the classifier toward certainty in its own predicted class, then
// score the sample by the cosine similarity between the features of the
// original and the perturbed input.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "trust/error.hpp"
#include "trust/matrix.hpp"
#include "trust/nn.hpp"

namespace trust {

enum class L1Mode { subgradient, proximal };

inline L1Mode parse_l1_mode(const std::string& s) {
  if (s == "subgradient") return L1Mode::subgradient;
  if (s == "proximal") return L1Mode::proximal;
  throw ConfigError("unknown l1_mode '" + s + "'");
}

inline std::string to_string(L1Mode m) {
  return m == L1Mode::subgradient ? "subgradient" : "proximal";
}

struct TrustConfig {
  double T = 5.0;
  double lambda = 0.001;
  double lr = 0.001;
  std::size_t max_iters = 10000;
  /// Plateau threshold on the difference of consecutive window means.
  double tol = 1e-6;
  std::size_t window = 100;
  /// Feature layer for the score; unset means the last hidden layer.
  std::optional<std::size_t> feature_layer;
  L1Mode l1_mode = L1Mode::subgradient;
  /// Keep x + dx inside [0, 1] (image inputs).
  bool clip = false;

  void validate() const {
    check_temperature(T);
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be > 0");
    if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
    if (window < 1) throw ConfigError("window must be >= 1");
    if (!(tol > 0.0)) throw ConfigError("tol must be > 0");
  }
};

inline nlohmann::json to_json(const TrustConfig& c) {
  return {{"T", c.T},
          {"lambda", c.lambda},
          {"lr", c.lr},
          {"max_iters", c.max_iters},
          {"tol", c.tol},
          {"window", c.window},
          {"feature_layer", c.feature_layer ? nlohmann::json(*c.feature_layer) : nlohmann::json()},
          {"l1_mode", to_string(c.l1_mode)},
          {"clip", c.clip}};
}

/// Parses a TrustConfig from JSON. Only the TrustConfig field names are
/// accepted; absent fields keep their defaults.
inline TrustConfig trust_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("trust config must be a JSON object");
  static const std::vector<std::string> known = {"T",      "lambda",        "lr",
                                                 "max_iters", "tol",       "window",
                                                 "feature_layer", "l1_mode", "clip"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown trust config field '" + key + "'");
    }
  }
  TrustConfig c;
  try {
    if (j.contains("T")) c.T = j.at("T").get<double>();
    if (j.contains("lambda")) c.lambda = j.at("lambda").get<double>();
    if (j.contains("lr")) c.lr = j.at("lr").get<double>();
    if (j.contains("max_iters")) c.max_iters = j.at("max_iters").get<std::size_t>();
    if (j.contains("tol")) c.tol = j.at("tol").get<double>();
    if (j.contains("window")) c.window = j.at("window").get<std::size_t>();
    if (j.contains("feature_layer") && !j.at("feature_layer").is_null()) {
      c.feature_layer = j.at("feature_layer").get<std::size_t>();
    }
    if (j.contains("l1_mode")) c.l1_mode = parse_l1_mode(j.at("l1_mode").get<std::string>());
    if (j.contains("clip")) c.clip = j.at("clip").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("trust config: ") + e.what());
  }
  c.validate();
  return c;
}

struct TrustResult {
  std::size_t predicted_label = 0;
  Vector delta_x;
  double score = 1.0;
  std::size_t iterations_run = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;

  bool operator==(const TrustResult&) const = default;
};

/// aᵀb / (|a| |b|), clamped to [-1, 1].
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require_size(b.size(), a.size(), "cosine_similarity");
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 || nb == 0.0) throw DegenerateInputError("cosine similarity of a zero vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

namespace detail {

inline double window_mean(const std::vector<double>& v, std::size_t begin, std::size_t count) {
  double s = 0.0;
  for (std::size_t i = begin; i < begin + count; ++i) s += v[i];
  return s / static_cast<double>(count);
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

/// Scores one sample. The objective is cross_entropy_t(x + dx, y, T) +
/// lambda |dx|_1 with y the deterministic prediction for x; dx starts at
/// zero and is updated with Adam until the windowed loss plateaus or
/// max_iters updates have been made.
inline TrustResult trust_score(const Mlp& model, std::span<const double> x,
                               const TrustConfig& cfg) {
  cfg.validate();
  require_size(x.size(), model.input_dim(), "trust_score input");
  const std::size_t layer = cfg.feature_layer.value_or(model.last_hidden());
  if (layer >= model.num_layers()) {
    throw IndexError("feature layer " + std::to_string(layer) + " out of range");
  }

  TrustResult result;
  ForwardTrace base = forward(model, x);
  result.predicted_label = argmax(base.logits());
  const std::size_t y = result.predicted_label;

  const std::size_t d = x.size();
  Vector dx(d, 0.0);
  Vector xp(x.begin(), x.end());
  Vector grad(d);
  Vector dlogits;
  Gradients scratch;
  ForwardTrace trace;
  AdamState adam({d});
  std::vector<double> losses;
  losses.reserve(std::min<std::size_t>(cfg.max_iters + 1, 1 << 16));

  const std::size_t w = cfg.window;
  std::size_t it = 0;
  for (;;) {
    forward(model, xp, trace);
    const double loss = cross_entropy_t(trace.logits(), y, cfg.T) + cfg.lambda * norm1(dx);
    if (!std::isfinite(loss)) throw OptimizationError("non-finite TRUST loss", it);
    losses.push_back(loss);
    if (it == cfg.max_iters) break;
    if (losses.size() >= 2 * w) {
      const std::size_t n = losses.size();
      const double recent = detail::window_mean(losses, n - w, w);
      const double previous = detail::window_mean(losses, n - 2 * w, w);
      if (std::abs(recent - previous) < cfg.tol) break;
    }

    dlogits = softmax_t(trace.logits(), cfg.T);
    dlogits[y] -= 1.0;
    for (auto& v : dlogits) v /= cfg.T;
    backpropagate(model, trace, dlogits, scratch, GradientParts::input_only);
    for (std::size_t i = 0; i < d; ++i) {
      const double g = scratch.input[i];
      if (cfg.l1_mode == L1Mode::proximal) {
        grad[i] = g;
      } else if (dx[i] != 0.0) {
        grad[i] = g + cfg.lambda * detail::sign(dx[i]);
      } else {
        // Minimum-norm element of the subdifferential at zero.
        grad[i] = std::abs(g) <= cfg.lambda ? 0.0 : g - cfg.lambda * detail::sign(g);
      }
    }
    adam_step(adam, dx, grad, cfg.lr);
    if (cfg.l1_mode == L1Mode::proximal) {
      const double shrink = cfg.lr * cfg.lambda;
      for (auto& v : dx) v = detail::sign(v) * std::max(0.0, std::abs(v) - shrink);
    }
    for (std::size_t i = 0; i < d; ++i) {
      if (cfg.clip) dx[i] = std::clamp(x[i] + dx[i], 0.0, 1.0) - x[i];
      xp[i] = x[i] + dx[i];
    }
    ++it;
  }

  result.iterations_run = it;
  result.initial_loss = losses.front();
  result.final_loss = losses.back();
  result.score = cosine_similarity(feature(base, layer), feature(trace, layer));
  result.delta_x = std::move(dx);
  return result;
}

/// Scores every row of `xs` with `workers` threads. Results are in input
/// order and identical for any worker count. A per-sample failure is
/// rethrown as BatchError carrying the lowest failing index.
inline std::vector<TrustResult> batch_trust_scores(const Mlp& model, const Matrix& xs,
                                                   const TrustConfig& cfg,
                                                   std::size_t workers = 1) {
  cfg.validate();
  const std::size_t n = xs.rows();
  std::vector<TrustResult> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = trust_score(model, xs.row(i), cfg);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    run();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(run);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw BatchError(i, e.kind(), e.what());
    } catch (const std::exception& e) {
      throw BatchError(i, "error", e.what());
    }
  }
  return results;
}

}  // namespace trust

#pragma once

// Reference confidence scores, all oriented so that higher means more
// confident: max softmax probability and negated MC-dropout entropy.

#include <cmath>
#include <cstdint>
#include <random>

#include "trust/nn.hpp"

namespace trust {

struct DropoutConfig {
  std::size_t passes = 50;
  std::uint64_t seed = 0;
};

/// Shannon entropy in nats, with 0 ln 0 = 0.
inline double entropy(std::span<const double> p) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw DomainError("probability entries must be >= 0");
    total += v;
  }
  if (p.empty() || std::abs(total - 1.0) > 1e-9) {
    throw DomainError("probabilities must sum to 1");
  }
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return std::max(0.0, h);
}

struct McDropoutResult {
  double score = 0.0;
  Vector mean_probs;
  std::size_t predicted_label = 0;
};

/// Averages softmax outputs over `passes` stochastic forwards with dropout
/// active; the score is the negated entropy of the average.
inline McDropoutResult mc_dropout_score(const Mlp& model, std::span<const double> x,
                                        const DropoutConfig& cfg) {
  if (cfg.passes < 1) throw ConfigError("passes must be >= 1");
  if (model.config.dropout_rate <= 0.0) {
    throw ConfigError("MC dropout needs a model with dropout_rate > 0");
  }
  Rng rng(cfg.seed);
  ForwardTrace trace;
  Vector mean(model.output_dim(), 0.0);
  for (std::size_t pass = 0; pass < cfg.passes; ++pass) {
    forward(model, x, trace, Pass::stochastic, &rng);
    const auto p = softmax_t(trace.logits());
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += p[i];
  }
  for (auto& v : mean) v /= static_cast<double>(cfg.passes);
  McDropoutResult out;
  out.score = -entropy(mean);
  out.predicted_label = argmax(mean);
  out.mean_probs = std::move(mean);
  return out;
}

inline double msp_score(const Mlp& model, std::span<const double> x) {
  const auto p = softmax_t(forward(model, x).logits());
  return p[argmax(p)];
}

/// Seed for sample `index` of a batch, so results do not depend on the
/// processing order.
inline std::uint64_t sample_seed(std::uint64_t base, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace trust

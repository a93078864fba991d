#pragma once

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "trust/data.hpp"
#include "trust/nn.hpp"

namespace trust {

enum class LossKind { cross_entropy, logitnorm };

inline LossKind parse_loss_kind(const std::string& s) {
  if (s == "cross_entropy") return LossKind::cross_entropy;
  if (s == "logitnorm") return LossKind::logitnorm;
  throw ConfigError("unknown loss kind '" + s + "'");
}

inline std::string to_string(LossKind k) {
  return k == LossKind::cross_entropy ? "cross_entropy" : "logitnorm";
}

struct TrainConfig {
  LossKind loss_kind = LossKind::cross_entropy;
  double logitnorm_tau = 0.04;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double lr = 0.001;
  std::uint64_t seed = 0;
  bool shuffle = true;
  /// When > 0, training stops after the first optimizer step at which the
  /// full training-set accuracy reaches this value.
  double target_accuracy = 0.0;

  void validate() const {
    if (epochs < 1 || batch_size < 1) throw ConfigError("epochs and batch_size must be >= 1");
    if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
    if (!(logitnorm_tau > 0.0)) throw ConfigError("logitnorm_tau must be > 0");
    if (!(target_accuracy >= 0.0 && target_accuracy <= 1.0)) {
      throw ConfigError("target_accuracy must lie in [0, 1]");
    }
  }
};

struct EpochRecord {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
};

using TrainHistory = std::vector<EpochRecord>;

/// Cross-entropy of softmax(logits / (tau * ||logits||)) at target.
inline double logitnorm_loss(std::span<const double> logits, std::size_t target, double tau) {
  if (!(tau > 0.0)) throw DomainError("logitnorm tau must be > 0");
  const double n = norm2(logits);
  if (n == 0.0) throw DegenerateInputError("logitnorm of a zero logit vector");
  return cross_entropy_t(logits, target, tau * n);
}

/// Gradient of logitnorm_loss with respect to the raw logits.
inline Vector logitnorm_logit_grad(std::span<const double> logits, std::size_t target, double tau) {
  const double n = norm2(logits);
  if (n == 0.0) throw DegenerateInputError("logitnorm of a zero logit vector");
  auto g = softmax_t(logits, tau * n);
  g[target] -= 1.0;
  // d/dz of z/(tau |z|) = (I - z z^T / |z|^2) / (tau |z|)
  const double gz = dot(g, logits);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = (g[i] - gz * logits[i] / (n * n)) / (tau * n);
  }
  return g;
}

inline void check_dataset_for(const Mlp& model, const Dataset& data) {
  if (data.empty()) throw ShapeError("empty dataset");
  require_size(data.dim(), model.input_dim(), "dataset feature dimension");
}

inline std::size_t predict(const Mlp& model, std::span<const double> x) {
  return argmax(forward(model, x).logits());
}

/// Fraction of samples whose argmax prediction matches the label.
inline double evaluate(const Mlp& model, const Dataset& data) {
  check_dataset_for(model, data);
  std::size_t correct = 0;
  ForwardTrace trace;
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward(model, data.sample(i), trace);
    if (argmax(trace.logits()) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

struct TrainResult {
  Mlp model;
  TrainHistory history;
};

/// Mini-batch Adam training. Each history record holds the mean mini-batch
/// loss over the epoch and the deterministic training accuracy at its end.
inline TrainResult train(Mlp model, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  model.validate();
  check_dataset_for(model, data);
  for (auto y : data.labels) {
    if (y >= model.output_dim()) throw ShapeError("training label outside model classes");
  }

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto adam = AdamState::for_blocks(model.parameter_blocks());
  const Pass pass = model.config.dropout_rate > 0.0 ? Pass::stochastic : Pass::deterministic;

  TrainHistory history;
  bool reached = false;
  ForwardTrace trace;
  Gradients grads = Gradients::zeros_like(model);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      // Fisher-Yates
      for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(order[i], order[pick(rng)]);
      }
    }
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      grads = Gradients::zeros_like(model);
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t i = order[b];
        const std::size_t y = data.labels[i];
        forward(model, data.sample(i), trace, pass, &rng);
        const auto logits = trace.logits();
        Vector dlogits;
        if (cfg.loss_kind == LossKind::cross_entropy) {
          loss_sum += cross_entropy_t(logits, y);
          dlogits = softmax_t(logits);
          dlogits[y] -= 1.0;
        } else {
          loss_sum += logitnorm_loss(logits, y, cfg.logitnorm_tau);
          dlogits = logitnorm_logit_grad(logits, y, cfg.logitnorm_tau);
        }
        backpropagate(model, trace, dlogits, grads);
      }
      grads.scale(1.0 / static_cast<double>(stop - start));
      adam_step(adam, model.parameter_blocks(), grads.blocks(), cfg.lr);
      seen = stop;
      if (cfg.target_accuracy > 0.0 && evaluate(model, data) >= cfg.target_accuracy) {
        reached = true;
        break;
      }
    }
    history.push_back({loss_sum / static_cast<double>(seen), evaluate(model, data)});
    if (reached) break;
  }
  return {std::move(model), std::move(history)};
}

inline void write_history_csv(std::ostream& out, const TrainHistory& history) {
  out << "epoch,train_loss,train_accuracy\n";
  char buf[96];
  for (std::size_t e = 0; e < history.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e + 1, history[e].train_loss,
                  history[e].train_accuracy);
    out << buf;
  }
}

}  // namespace trust

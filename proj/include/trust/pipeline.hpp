#pragma once

// Orchestration shared by the command-line tool and the acceptance suite:
// scoring a dataset with any method, and the distribution-shift study.

#include <string>
#include <vector>

#include "trust/baselines.hpp"
#include "trust/data.hpp"
#include "trust/metrics.hpp"
#include "trust/report.hpp"
#include "trust/training.hpp"
#include "trust/trust.hpp"

namespace trust {

enum class Method { trust, mc_dropout, msp };

inline Method parse_method(const std::string& s) {
  if (s == "trust") return Method::trust;
  if (s == "mc_dropout") return Method::mc_dropout;
  if (s == "msp") return Method::msp;
  throw ConfigError("unknown method '" + s + "'");
}

inline std::string to_string(Method m) {
  switch (m) {
    case Method::trust: return "trust";
    case Method::mc_dropout: return "mc_dropout";
    case Method::msp: return "msp";
  }
  return "unknown";
}

struct ScoringOptions {
  Method method = Method::trust;
  TrustConfig trust;
  DropoutConfig dropout;
  std::size_t workers = 1;
};

/// One row per sample, in dataset order. MC-dropout sample i uses the seed
/// sample_seed(dropout.seed, i); `iterations` holds the pass count there.
inline std::vector<report::ScoreRow> score_dataset(const Mlp& model, const Dataset& data,
                                                   const ScoringOptions& opt) {
  require_size(data.dim(), model.input_dim(), "dataset feature dimension");
  std::vector<report::ScoreRow> rows(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    rows[i].sample_id = i;
    rows[i].true_label = data.labels[i];
    rows[i].method = to_string(opt.method);
  }
  switch (opt.method) {
    case Method::trust: {
      const auto results = batch_trust_scores(model, data.features, opt.trust, opt.workers);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].predicted_label = results[i].predicted_label;
        rows[i].score = results[i].score;
        rows[i].iterations = results[i].iterations_run;
        rows[i].final_loss = results[i].final_loss;
      }
      break;
    }
    case Method::mc_dropout:
      for (std::size_t i = 0; i < rows.size(); ++i) {
        DropoutConfig cfg = opt.dropout;
        cfg.seed = sample_seed(opt.dropout.seed, i);
        const auto r = mc_dropout_score(model, data.sample(i), cfg);
        rows[i].predicted_label = r.predicted_label;
        rows[i].score = r.score;
        rows[i].iterations = cfg.passes;
      }
      break;
    case Method::msp:
      for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].predicted_label = predict(model, data.sample(i));
        rows[i].score = msp_score(model, data.sample(i));
      }
      break;
  }
  return rows;
}

inline std::vector<double> scores_of(const std::vector<report::ScoreRow>& rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.score);
  return out;
}

inline double accuracy_of(const std::vector<report::ScoreRow>& rows) {
  if (rows.empty()) throw DegenerateInputError("accuracy of an empty score set");
  std::size_t correct = 0;
  for (const auto& r : rows) correct += r.correct() ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

/// Every `stride`-th sample, starting with the first.
inline Dataset subsample(const Dataset& data, std::size_t stride) {
  if (stride < 1) throw ConfigError("stride must be >= 1");
  const std::size_t n = (data.size() + stride - 1) / stride;
  Dataset out;
  out.features = Matrix(n, data.dim());
  out.num_classes = data.num_classes;
  out.name = data.name;
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = data.sample(i * stride);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels.push_back(data.labels[i * stride]);
  }
  return out;
}

struct ShiftLevel {
  double level = 0.0;
  double accuracy = 0.0;
  double accuracy_drop = 0.0;
  double mmd = 0.0;
  double mean_score = 0.0;
  std::vector<report::ScoreRow> rows;
};

/// Scores `test` under each corruption level and compares the resulting
/// score distribution with `reference_scores` (typically training-set
/// scores). The accuracy drop is relative to the uncorrupted test set.
inline std::vector<ShiftLevel> shift_study(const Mlp& model, const Dataset& test,
                                           const std::vector<double>& reference_scores,
                                           CorruptionKind kind, const std::vector<double>& levels,
                                           std::uint64_t seed, const ScoringOptions& opt) {
  const double clean_accuracy = evaluate(model, test);
  std::vector<ShiftLevel> out;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const auto corrupted = corrupt(test, {kind, levels[li], sample_seed(seed, li)});
    ShiftLevel s;
    s.level = levels[li];
    s.rows = score_dataset(model, corrupted, opt);
    s.accuracy = accuracy_of(s.rows);
    s.accuracy_drop = clean_accuracy - s.accuracy;
    const auto scores = scores_of(s.rows);
    s.mmd = mmd(scores, reference_scores);
    double sum = 0.0;
    for (double v : scores) sum += v;
    s.mean_score = sum / static_cast<double>(scores.size());
    out.push_back(std::move(s));
  }
  return out;
}

/// Benchmark used by the acceptance suite and as the CLI defaults.
namespace reference {

inline SyntheticSpec synthetic_spec() {
  SyntheticSpec s;
  s.d = 64;
  s.k = 4;
  s.modes_per_class = 2;
  s.samples_per_mode = 250;
  s.radius = 1.0;
  s.cluster_std = 0.05 * s.radius;
  s.seed = 42;
  return s;
}

inline MlpConfig mlp_config() { return {{64, 128, 64, 4}, 0.2, 42}; }

inline TrainConfig train_config() {
  TrainConfig c;
  c.epochs = 100;
  c.batch_size = 32;
  c.lr = 0.001;
  c.seed = 42;
  c.target_accuracy = 0.95;
  return c;
}

}  // namespace reference

}  // namespace trust

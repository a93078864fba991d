#pragma once

// Risk-based evaluation of a confidence score (higher = more confident).
// Every ordering breaks score ties by ascending sample_id.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "trust/error.hpp"

namespace trust {

struct ScoredPrediction {
  std::size_t sample_id = 0;
  double score = 0.0;
  bool correct = false;
};

struct CoveragePoint {
  double coverage = 0.0;
  double risk = 0.0;
};

using RiskCoverageCurve = std::vector<CoveragePoint>;

struct SparsificationCurve {
  std::vector<double> removed_fraction;
  std::vector<double> method_error;
  std::vector<double> oracle_error;
};

namespace detail {

inline void require_nonempty(const std::vector<ScoredPrediction>& preds) {
  if (preds.empty()) throw DegenerateInputError("metric over an empty prediction set");
}

}  // namespace detail

/// Indices of `preds` from most to least confident.
inline std::vector<std::size_t> confidence_order(const std::vector<ScoredPrediction>& preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (preds[a].score != preds[b].score) return preds[a].score > preds[b].score;
    return preds[a].sample_id < preds[b].sample_id;
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    const auto& p = preds[order[i - 1]];
    const auto& q = preds[order[i]];
    if (p.score == q.score && p.sample_id == q.sample_id) {
      throw DomainError("duplicate sample_id " + std::to_string(p.sample_id));
    }
  }
  return order;
}

/// Accuracy over the ceil(fraction * n) most confident predictions.
inline double accuracy_at_top(const std::vector<ScoredPrediction>& preds, double fraction) {
  detail::require_nonempty(preds);
  if (!(fraction > 0.0 && fraction <= 1.0)) throw DomainError("fraction must lie in (0, 1]");
  const auto order = confidence_order(preds);
  // Guard against 0.3 * 10 = 3.0000000000000004 rounding up.
  const double raw = fraction * static_cast<double>(preds.size());
  auto take = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  take = std::clamp<std::size_t>(take, 1, preds.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < take; ++i) correct += preds[order[i]].correct ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(take);
}

inline RiskCoverageCurve risk_coverage_curve(const std::vector<ScoredPrediction>& preds) {
  detail::require_nonempty(preds);
  const auto order = confidence_order(preds);
  const double n = static_cast<double>(preds.size());
  RiskCoverageCurve curve;
  curve.reserve(preds.size());
  std::size_t errors = 0;
  for (std::size_t m = 1; m <= order.size(); ++m) {
    errors += preds[order[m - 1]].correct ? 0 : 1;
    curve.push_back({static_cast<double>(m) / n,
                     static_cast<double>(errors) / static_cast<double>(m)});
  }
  return curve;
}

/// Mean selective risk over all n coverage prefixes.
inline double aurc(const std::vector<ScoredPrediction>& preds) {
  const auto curve = risk_coverage_curve(preds);
  double s = 0.0;
  for (const auto& p : curve) s += p.risk;
  return s / static_cast<double>(curve.size());
}

/// Error rate of the retained samples after removing floor(f n) of them,
/// for f = 0, 1/steps, ..., (steps-1)/steps. The method removes lowest
/// scores first; the oracle removes incorrect samples first.
inline SparsificationCurve sparsification_curve(const std::vector<ScoredPrediction>& preds,
                                                std::size_t steps = 100) {
  detail::require_nonempty(preds);
  if (steps < 2) throw DomainError("steps must be >= 2");
  const auto order = confidence_order(preds);
  const std::size_t n = preds.size();
  // prefix_errors[m]: errors among the m most confident.
  std::size_t running = 0;
  std::vector<std::size_t> prefix_errors(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    running += preds[order[i]].correct ? 0 : 1;
    prefix_errors[i + 1] = running;
  }
  const std::size_t total_errors = running;

  SparsificationCurve curve;
  for (std::size_t j = 0; j < steps; ++j) {
    const double f = static_cast<double>(j) / static_cast<double>(steps);
    const auto removed = static_cast<std::size_t>(
        std::floor(f * static_cast<double>(n) + 1e-9));
    const std::size_t kept = n - removed;
    const double method = static_cast<double>(prefix_errors[kept]) / static_cast<double>(kept);
    const std::size_t oracle_errors = total_errors > removed ? total_errors - removed : 0;
    curve.removed_fraction.push_back(f);
    curve.method_error.push_back(method);
    curve.oracle_error.push_back(static_cast<double>(oracle_errors) / static_cast<double>(kept));
  }
  return curve;
}

/// Trapezoidal area between the method and oracle sparsification curves,
/// divided by the integration range.
inline double ause(const std::vector<ScoredPrediction>& preds, std::size_t steps = 100) {
  const auto c = sparsification_curve(preds, steps);
  double area = 0.0;
  for (std::size_t j = 0; j + 1 < steps; ++j) {
    const double e0 = c.method_error[j] - c.oracle_error[j];
    const double e1 = c.method_error[j + 1] - c.oracle_error[j + 1];
    area += 0.5 * (e0 + e1) * (c.removed_fraction[j + 1] - c.removed_fraction[j]);
  }
  return std::max(0.0, area / c.removed_fraction.back());
}

/// Fractional (average) ranks starting at 1.
inline std::vector<double> fractional_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("correlation of sequences with different lengths");
  if (a.size() < 2) throw DegenerateInputError("correlation needs at least two points");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw DegenerateInputError("correlation of a constant sequence");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// Spearman rank correlation with average-rank tie handling.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("spearman: length mismatch");
  if (a.size() < 2) throw DegenerateInputError("spearman needs at least two points");
  return pearson(fractional_ranks(a), fractional_ranks(b));
}

/// Median of all pairwise absolute differences (floored at 1e-9).
inline double median_pairwise_distance(const std::vector<double>& pooled) {
  std::vector<double> diffs;
  diffs.reserve(pooled.size() * (pooled.size() - 1) / 2);
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    for (std::size_t j = i + 1; j < pooled.size(); ++j) diffs.push_back(std::abs(pooled[i] - pooled[j]));
  }
  const std::size_t mid = diffs.size() / 2;
  std::nth_element(diffs.begin(), diffs.begin() + static_cast<std::ptrdiff_t>(mid), diffs.end());
  double median = diffs[mid];
  if (diffs.size() % 2 == 0) {
    const double lower = *std::max_element(diffs.begin(), diffs.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  return std::max(median, 1e-9);
}

/// Square root of the unbiased squared MMD with a Gaussian kernel whose
/// bandwidth is the pooled median pairwise distance. Negative estimates
/// clamp to zero.
inline double mmd(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw DegenerateInputError("mmd needs >= 2 points per sample");
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const double h = median_pairwise_distance(pooled);
  const double inv = 1.0 / (2.0 * h * h);
  auto k = [inv](double u, double v) { return std::exp(-(u - v) * (u - v) * inv); };

  auto within = [&](const std::vector<double>& s) {
    double sum = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = i + 1; j < s.size(); ++j) sum += k(s[i], s[j]);
    }
    const double n = static_cast<double>(s.size());
    return 2.0 * sum / (n * (n - 1.0));
  };
  double cross = 0.0;
  for (double u : a) {
    for (double v : b) cross += k(u, v);
  }
  cross /= static_cast<double>(a.size()) * static_cast<double>(b.size());
  const double mmd2 = within(a) + within(b) - 2.0 * cross;
  return std::sqrt(std::max(0.0, mmd2));
}

struct HistogramBin {
  double center = 0.0;
  double mass = 0.0;
};

/// Equal-width histogram normalized to unit mass; out-of-range values land
/// in the edge bins.
inline std::vector<HistogramBin> histogram(const std::vector<double>& values, std::size_t bins,
                                           double lo, double hi) {
  if (bins < 1) throw DomainError("histogram needs at least one bin");
  if (!(lo < hi)) throw DomainError("histogram range must satisfy lo < hi");
  std::vector<std::size_t> counts(bins, 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double v : values) {
    double pos = std::floor((v - lo) / width);
    pos = std::clamp(pos, 0.0, static_cast<double>(bins - 1));
    ++counts[static_cast<std::size_t>(pos)];
  }
  std::vector<HistogramBin> out(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].center = lo + (static_cast<double>(b) + 0.5) * width;
    out[b].mass = values.empty() ? 0.0
                                 : static_cast<double>(counts[b]) / static_cast<double>(values.size());
  }
  return out;
}

}  // namespace trust

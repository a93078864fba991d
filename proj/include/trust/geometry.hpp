#pragma once

// High-dimensional geometry and score-noise results, in closed form and as
// Monte-Carlo checks.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "trust/error.hpp"
#include "trust/matrix.hpp"
#include "trust/nn.hpp"

namespace trust::geometry {

struct McReport {
  std::size_t trials = 0;
  double empirical_value = 0.0;
  double theoretical_value = 0.0;
  double abs_error = 0.0;
  double rel_error = 0.0;
};

inline McReport make_report(std::size_t trials, double empirical, double theoretical) {
  McReport r;
  r.trials = trials;
  r.empirical_value = empirical;
  r.theoretical_value = theoretical;
  r.abs_error = std::abs(empirical - theoretical);
  r.rel_error = theoretical != 0.0 ? r.abs_error / std::abs(theoretical) : r.abs_error;
  return r;
}

/// Standard normal CDF through erfc (accurate to ~1e-16 relative).
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// P(noisy s_i < noisy s_j) for true gap delta_s = s_i - s_j under i.i.d.
/// N(0, sigma^2) noise on both scores.
inline double sorting_error_prob(double delta_s, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("sigma must be > 0");
  if (!(delta_s >= 0.0)) throw DomainError("delta_s must be >= 0");
  return 1.0 - normal_cdf(delta_s / (std::numbers::sqrt2 * sigma));
}

inline McReport mc_sorting_error(double delta_s, double sigma, std::size_t trials, Rng& rng) {
  if (trials < 1) throw DomainError("trials must be >= 1");
  if (!(sigma >= 0.0)) throw DomainError("sigma must be >= 0");
  std::normal_distribution<double> noise(0.0, 1.0);
  std::size_t flips = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const double s1 = delta_s + sigma * noise(rng);
    const double s2 = sigma * noise(rng);
    if (s1 < s2) ++flips;
  }
  const double theory = sigma > 0.0 ? sorting_error_prob(delta_s, sigma) : (delta_s > 0.0 ? 0.0 : 0.5);
  return make_report(trials, static_cast<double>(flips) / static_cast<double>(trials), theory);
}

/// n points uniform on the unit sphere in R^d (normalized Gaussians).
inline Matrix sample_sphere(std::size_t n, std::size_t d, Rng& rng) {
  if (d < 2) throw DomainError("sphere dimension must be >= 2");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.row(i);
    double nrm = 0.0;
    do {
      for (auto& v : row) v = gauss(rng);
      nrm = norm2(row);
    } while (nrm == 0.0);
    for (auto& v : row) v /= nrm;
  }
  return out;
}

/// Minimum cosine over all unordered pairs of rows.
inline double min_pairwise_cos(const Matrix& points) {
  if (points.rows() < 2) throw DomainError("need at least two points");
  std::vector<double> norms(points.rows());
  for (std::size_t i = 0; i < points.rows(); ++i) {
    norms[i] = norm2(points.row(i));
    if (norms[i] == 0.0) throw DegenerateInputError("zero-norm point");
  }
  double best = 1.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    for (std::size_t j = i + 1; j < points.rows(); ++j) {
      const double c = dot(points.row(i), points.row(j)) / (norms[i] * norms[j]);
      best = std::min(best, c);
    }
  }
  return std::max(-1.0, best);
}

/// Extreme-value approximation -sqrt(2 ln n / d).
inline double expected_min_cos(std::size_t n, std::size_t d) {
  if (n < 2 || d < 1) throw DomainError("expected_min_cos needs n >= 2 and d >= 1");
  return -std::sqrt(2.0 * std::log(static_cast<double>(n)) / static_cast<double>(d));
}

/// Empirical P(| |x| - sqrt(d) sigma | < eps sqrt(d) sigma) for Gaussian
/// coordinates, against the Chebyshev lower bound 1 - 2 / (eps^2 d).
inline McReport norm_concentration(std::size_t d, double sigma, std::size_t samples, double eps,
                                   Rng& rng) {
  if (d < 1 || samples < 1) throw DomainError("d and samples must be >= 1");
  if (!(sigma > 0.0) || !(eps > 0.0)) throw DomainError("sigma and eps must be > 0");
  std::normal_distribution<double> gauss(0.0, sigma);
  const double center = std::sqrt(static_cast<double>(d)) * sigma;
  std::size_t inside = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double v = gauss(rng);
      sq += v * v;
    }
    if (std::abs(std::sqrt(sq) - center) < eps * center) ++inside;
  }
  const double s4 = std::pow(sigma, 4);
  const double mu4 = 3.0 * s4;
  const double bound = std::max(0.0, 1.0 - (mu4 - s4) / (eps * eps * static_cast<double>(d) * s4));
  return make_report(samples, static_cast<double>(inside) / static_cast<double>(samples), bound);
}

struct CosNoiseReport {
  /// Var(cos(omega + dw)) against sin^2(omega) sigma_omega^2.
  McReport variance;
  double score_gap = 0.0;
  double p_cos = 0.0;
  double p_direct = 0.0;
  /// Standard deviation of p_cos - p_direct under independent binomials.
  double binomial_sd = 0.0;
  bool bound_holds = false;
};

/// Propagates angular noise through the cosine. The sorting comparison uses
/// two items with score gap sigma_omega, the first at angle omega: under
/// angular noise both scores are cos(angle + noise); under direct noise the
/// scores themselves get N(0, sigma_omega^2). Both scenarios share the same
/// standard-normal draws, which are moment-matched to unit variance.
inline CosNoiseReport cos_noise_bound_check(double omega, double sigma_omega, std::size_t trials,
                                            Rng& rng) {
  if (!(omega > 0.0 && omega < std::numbers::pi)) throw DomainError("omega must lie in (0, pi)");
  if (!(sigma_omega > 0.0)) throw DomainError("sigma_omega must be > 0");
  if (trials < 2) throw DomainError("trials must be >= 2");

  auto standardized = [&] {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> z(trials);
    for (auto& v : z) v = gauss(rng);
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= static_cast<double>(trials);
    double ss = 0.0;
    for (double v : z) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(trials));
    for (auto& v : z) v = (v - mean) / sd;
    return z;
  };
  const auto z1 = standardized();
  const auto z2 = standardized();

  double mean = 0.0;
  for (double z : z1) mean += std::cos(omega + sigma_omega * z);
  mean /= static_cast<double>(trials);
  double var = 0.0;
  for (double z : z1) {
    const double c = std::cos(omega + sigma_omega * z) - mean;
    var += c * c;
  }
  var /= static_cast<double>(trials);
  const double s = std::sin(omega);

  CosNoiseReport out;
  out.variance = make_report(trials, var, s * s * sigma_omega * sigma_omega);

  const double s1 = std::cos(omega);
  const double gap = sigma_omega;
  const double s2 = std::max(-1.0, s1 - gap);
  const double omega2 = std::acos(s2);
  out.score_gap = s1 - s2;
  std::size_t cos_flips = 0;
  std::size_t direct_flips = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    if (std::cos(omega + sigma_omega * z1[t]) < std::cos(omega2 + sigma_omega * z2[t])) ++cos_flips;
    if (s1 + sigma_omega * z1[t] < s2 + sigma_omega * z2[t]) ++direct_flips;
  }
  const double n = static_cast<double>(trials);
  out.p_cos = static_cast<double>(cos_flips) / n;
  out.p_direct = static_cast<double>(direct_flips) / n;
  out.binomial_sd = std::sqrt(out.p_cos * (1.0 - out.p_cos) / n + out.p_direct * (1.0 - out.p_direct) / n);
  out.bound_holds = out.p_cos <= out.p_direct + 2.0 * out.binomial_sd;
  return out;
}

}  // namespace trust::geometry

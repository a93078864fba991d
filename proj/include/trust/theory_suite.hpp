#pragma once

// Fixed battery of Monte-Carlo checks of the geometry results, each with
// its pass/fail tolerance.

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trust/baselines.hpp"
#include "trust/geometry.hpp"
#include "trust/report.hpp"

namespace trust::geometry {

struct TheoryCheck {
  std::string name;
  McReport report;
  std::string criterion;
  bool pass = false;
  nlohmann::json extra = nlohmann::json::object();
};

struct TheorySuiteConfig {
  std::uint64_t seed = 0;
  std::size_t norm_dim = 10000;
  std::size_t norm_samples = 10000;
  double norm_eps = 0.02;
  std::size_t min_cos_points = 1000;
  std::vector<std::size_t> min_cos_dims = {128, 512};
  std::size_t min_cos_repetitions = 50;
  std::size_t sorting_trials = 100000;
  std::size_t cos_noise_trials = 100000;
  double cos_noise_sigma = 0.05;
};

inline std::vector<TheoryCheck> run_theory_suite(const TheorySuiteConfig& cfg) {
  std::vector<TheoryCheck> checks;
  std::uint64_t stream = 0;
  auto next_rng = [&] { return Rng(sample_seed(cfg.seed, stream++)); };

  {
    auto rng = next_rng();
    TheoryCheck c;
    c.name = "norm_concentration";
    c.report = norm_concentration(cfg.norm_dim, 1.0, cfg.norm_samples, cfg.norm_eps, rng);
    c.criterion = "empirical >= 0.99 and empirical >= chebyshev bound";
    c.pass = c.report.empirical_value >= 0.99 &&
             c.report.empirical_value >= c.report.theoretical_value;
    c.extra = {{"d", cfg.norm_dim}, {"sigma", 1.0}, {"eps", cfg.norm_eps}};
    checks.push_back(std::move(c));
  }

  {
    std::vector<double> means;
    for (auto d : cfg.min_cos_dims) {
      auto rng = next_rng();
      double sum = 0.0;
      for (std::size_t r = 0; r < cfg.min_cos_repetitions; ++r) {
        sum += min_pairwise_cos(sample_sphere(cfg.min_cos_points, d, rng));
      }
      const double mean = sum / static_cast<double>(cfg.min_cos_repetitions);
      means.push_back(mean);
      TheoryCheck c;
      c.name = "min_pairwise_cos_d" + std::to_string(d);
      c.report = make_report(cfg.min_cos_repetitions, mean, expected_min_cos(cfg.min_cos_points, d));
      c.criterion = "mean < 0 and rel_error <= 0.25";
      c.pass = mean < 0.0 && c.report.rel_error <= 0.25;
      c.extra = {{"n", cfg.min_cos_points}, {"d", d}};
      checks.push_back(std::move(c));
    }
    TheoryCheck c;
    c.name = "min_pairwise_cos_shrinks_with_d";
    bool shrinking = true;
    for (std::size_t i = 1; i < means.size(); ++i) {
      shrinking = shrinking && std::abs(means[i]) < std::abs(means[i - 1]);
    }
    c.report = make_report(cfg.min_cos_repetitions, means.empty() ? 0.0 : std::abs(means.back()),
                           means.empty() ? 0.0 : std::abs(means.front()));
    c.criterion = "|mean min cos| strictly decreasing in d";
    c.pass = shrinking;
    c.extra = {{"dims", cfg.min_cos_dims}, {"means", means}};
    checks.push_back(std::move(c));
  }

  {
    auto rng = next_rng();
    TheoryCheck c;
    c.name = "sorting_error";
    c.report = mc_sorting_error(1.0, 1.0, cfg.sorting_trials, rng);
    c.criterion = "abs_error <= 0.005";
    c.pass = c.report.abs_error <= 0.005;
    c.extra = {{"delta_s", 1.0}, {"sigma", 1.0}};
    checks.push_back(std::move(c));
  }

  {
    auto rng = next_rng();
    const auto r = cos_noise_bound_check(std::numbers::pi / 2.0, cfg.cos_noise_sigma,
                                         cfg.cos_noise_trials, rng);
    TheoryCheck c;
    c.name = "cos_noise_variance_right_angle";
    c.report = r.variance;
    const double ratio = r.variance.empirical_value / r.variance.theoretical_value;
    c.criterion = "variance ratio in [0.95, 1.05]";
    c.pass = ratio >= 0.95 && ratio <= 1.05;
    c.extra = {{"omega", std::numbers::pi / 2.0}, {"sigma_omega", cfg.cos_noise_sigma}, {"ratio", ratio}};
    checks.push_back(std::move(c));
  }

  for (int deg : {15, 30, 45, 60, 75, 90}) {
    auto rng = next_rng();
    const double omega = deg * std::numbers::pi / 180.0;
    const auto r = cos_noise_bound_check(omega, cfg.cos_noise_sigma, cfg.cos_noise_trials, rng);
    TheoryCheck c;
    c.name = "cos_noise_sorting_bound_" + std::to_string(deg) + "deg";
    c.report = make_report(cfg.cos_noise_trials, r.p_cos, r.p_direct);
    c.criterion = "p_cos <= p_direct + 2 binomial sd";
    c.pass = r.bound_holds;
    c.extra = {{"omega", omega},
               {"sigma_omega", cfg.cos_noise_sigma},
               {"score_gap", r.score_gap},
               {"binomial_sd", r.binomial_sd}};
    checks.push_back(std::move(c));
  }
  return checks;
}

inline nlohmann::json to_json(const std::vector<TheoryCheck>& checks) {
  nlohmann::json arr = nlohmann::json::array();
  bool all = true;
  for (const auto& c : checks) {
    auto j = report::to_json(c.report);
    j["name"] = c.name;
    j["criterion"] = c.criterion;
    j["pass"] = c.pass;
    j["details"] = c.extra;
    arr.push_back(std::move(j));
    all = all && c.pass;
  }
  return {{"checks", arr}, {"all_pass", all}};
}

}  // namespace trust::geometry

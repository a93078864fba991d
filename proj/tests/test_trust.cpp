#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "trust/trust.hpp"

using namespace trust;

namespace {

Mlp small_model(std::uint64_t seed = 21) { return Mlp::init({{6, 10, 8, 3}, 0.0, seed}); }

Matrix random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(n, d);
  for (auto& v : m.values()) v = g(rng);
  return m;
}

TrustConfig quick() {
  TrustConfig c;
  c.max_iters = 300;
  c.lr = 0.01;
  return c;
}

}  // namespace

TEST(Cosine, Examples) {
  EXPECT_DOUBLE_EQ(cosine_similarity(Vector{3, -4}, Vector{3, -4}), 1.0);
  EXPECT_EQ(cosine_similarity(Vector{1, 0}, Vector{0, 1}), 0.0);
  EXPECT_NEAR(cosine_similarity(Vector{1, 2}, Vector{2, 1}), 0.8, 1e-15);
  EXPECT_NEAR(cosine_similarity(Vector{1, 2}, Vector{-1, -2}), -1.0, 1e-15);
}

TEST(Cosine, ZeroVectorIsDegenerate) {
  EXPECT_THROW(cosine_similarity(Vector{0, 0}, Vector{1, 0}), DegenerateInputError);
  EXPECT_THROW(cosine_similarity(Vector{1, 0}, Vector{0, 0}), DegenerateInputError);
}

TEST(Cosine, InvariantToPositiveScaling) {
  const Vector a{0.3, -1.7, 2.2}, b{1.1, 0.4, -0.9};
  Vector sa = a;
  for (auto& v : sa) v *= 37.5;
  Vector sb = b;
  for (auto& v : sb) v *= 1e-3;
  EXPECT_NEAR(cosine_similarity(a, b), cosine_similarity(sa, sb), 1e-12);
}

TEST(TrustScore, HugeLambdaKeepsInputFixed) {
  const auto m = small_model();
  const auto xs = random_rows(5, 6, 1);
  auto cfg = quick();
  cfg.lambda = 1e6;
  for (std::size_t i = 0; i < xs.rows(); ++i) {
    const auto r = trust_score(m, xs.row(i), cfg);
    for (double v : r.delta_x) EXPECT_EQ(v, 0.0);
    EXPECT_DOUBLE_EQ(r.score, 1.0);
  }
}

TEST(TrustScore, OneIterationCapHonored) {
  const auto m = small_model();
  const auto xs = random_rows(1, 6, 2);
  auto cfg = quick();
  cfg.max_iters = 1;
  const auto r = trust_score(m, xs.row(0), cfg);
  EXPECT_EQ(r.iterations_run, 1u);
}

TEST(TrustScore, PredictedLabelIsArgmax) {
  const auto m = small_model();
  const auto xs = random_rows(8, 6, 3);
  for (std::size_t i = 0; i < xs.rows(); ++i) {
    const auto r = trust_score(m, xs.row(i), quick());
    const auto z = oracle::logits(m, Vector(xs.row(i).begin(), xs.row(i).end()));
    std::size_t best = 0;
    for (std::size_t c = 1; c < z.size(); ++c) {
      if (z[c] > z[best]) best = c;
    }
    EXPECT_EQ(r.predicted_label, best);
  }
}

TEST(TrustScore, LossDoesNotIncrease) {
  const auto m = small_model();
  const auto xs = random_rows(10, 6, 4);
  const auto cfg = quick();
  for (std::size_t i = 0; i < xs.rows(); ++i) {
    const auto r = trust_score(m, xs.row(i), cfg);
    EXPECT_TRUE(std::isfinite(r.final_loss));
    EXPECT_LE(r.final_loss, r.initial_loss + cfg.tol);
    EXPECT_GE(r.score, -1.0);
    EXPECT_LE(r.score, 1.0);
  }
}

TEST(TrustScore, ReportedScoreMatchesIndependentFeatures) {
  const auto m = small_model();
  const auto xs = random_rows(3, 6, 5);
  for (std::size_t i = 0; i < xs.rows(); ++i) {
    const Vector x(xs.row(i).begin(), xs.row(i).end());
    const auto r = trust_score(m, x, quick());
    Vector xp = x;
    for (std::size_t k = 0; k < x.size(); ++k) xp[k] += r.delta_x[k];
    const auto fa = oracle::hidden(m, x, 2);
    const auto fb = oracle::hidden(m, xp, 2);
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t k = 0; k < fa.size(); ++k) {
      ab += fa[k] * fb[k];
      aa += fa[k] * fa[k];
      bb += fb[k] * fb[k];
    }
    EXPECT_NEAR(r.score, ab / std::sqrt(aa * bb), 1e-12);
    const double want_loss = oracle::loss(m, xp, r.predicted_label, 5.0) + 0.001 * norm1(r.delta_x);
    EXPECT_NEAR(r.final_loss, want_loss, 1e-12);
  }
}

TEST(TrustScore, PlateauStopsBeforeCap) {
  const auto m = small_model();
  const auto xs = random_rows(1, 6, 6);
  TrustConfig cfg;
  cfg.tol = 1e-2;
  cfg.window = 10;
  cfg.max_iters = 5000;
  const auto r = trust_score(m, xs.row(0), cfg);
  EXPECT_GE(r.iterations_run, 2 * cfg.window - 1);
  EXPECT_LT(r.iterations_run, cfg.max_iters);
}

TEST(TrustScore, ProximalModeProducesExactZeros) {
  const auto m = small_model();
  const auto xs = random_rows(1, 6, 7);
  auto cfg = quick();
  cfg.l1_mode = L1Mode::proximal;
  // Adam moves each coordinate by about lr per step, less than lr * lambda.
  cfg.lambda = 1.5;
  const auto r = trust_score(m, xs.row(0), cfg);
  for (double v : r.delta_x) EXPECT_EQ(v, 0.0);
  EXPECT_DOUBLE_EQ(r.score, 1.0);
  cfg.lambda = 0.2;
  const auto loose = trust_score(m, xs.row(0), cfg);
  EXPECT_GT(norm1(loose.delta_x), 0.0);
}

TEST(TrustScore, ClipKeepsPerturbedInputInUnitBox) {
  const auto m = small_model();
  Vector x{0.0, 1.0, 0.5, 0.2, 0.9, 0.0};
  auto cfg = quick();
  cfg.clip = true;
  cfg.lr = 0.2;
  const auto r = trust_score(m, x, cfg);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_GE(x[i] + r.delta_x[i], 0.0);
    EXPECT_LE(x[i] + r.delta_x[i], 1.0);
  }
}

TEST(TrustScore, FeatureLayerSelectable) {
  const auto m = small_model();
  const auto xs = random_rows(1, 6, 8);
  auto cfg = quick();
  cfg.feature_layer = 0;
  const auto r = trust_score(m, xs.row(0), cfg);
  const Vector x(xs.row(0).begin(), xs.row(0).end());
  Vector xp = x;
  for (std::size_t k = 0; k < x.size(); ++k) xp[k] += r.delta_x[k];
  EXPECT_NEAR(r.score, cosine_similarity(x, xp), 1e-15);
  cfg.feature_layer = 3;
  EXPECT_THROW(trust_score(m, xs.row(0), cfg), IndexError);
}

TEST(TrustScore, DivergenceReportsIteration) {
  const auto m = small_model();
  Vector x(6, std::numeric_limits<double>::max());
  try {
    trust_score(m, x, quick());
    FAIL() << "expected OptimizationError";
  } catch (const OptimizationError& e) {
    EXPECT_EQ(e.iteration(), 0u);
  }
}

TEST(TrustScore, ZeroFeatureIsDegenerate) {
  auto m = small_model();
  for (auto& b : m.biases) std::fill(b.begin(), b.end(), 0.0);
  EXPECT_THROW(trust_score(m, Vector(6, 0.0), quick()), DegenerateInputError);
}

TEST(TrustConfig, JsonRoundTripAndValidation) {
  TrustConfig c;
  c.T = 100.0;
  c.lambda = 0.1;
  c.feature_layer = 1;
  c.l1_mode = L1Mode::proximal;
  const auto back = trust_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_THROW(trust_config_from_json({{"temperature", 5}}), ConfigError);
  EXPECT_THROW(trust_config_from_json({{"T", 0}}), DomainError);
  EXPECT_THROW(trust_config_from_json({{"lr", -1}}), ConfigError);
  EXPECT_THROW(trust_config_from_json({{"window", 0}}), ConfigError);
  EXPECT_THROW(trust_config_from_json({{"l1_mode", "l2"}}), ConfigError);
  EXPECT_THROW(trust_config_from_json({{"T", "hot"}}), ConfigError);
}

TEST(BatchTrust, EmptyInputGivesEmptyOutput) {
  EXPECT_TRUE(batch_trust_scores(small_model(), Matrix(0, 6), quick(), 4).empty());
}

TEST(BatchTrust, SingletonEqualsDirectCall) {
  const auto m = small_model();
  const auto xs = random_rows(1, 6, 9);
  const auto batch = batch_trust_scores(m, xs, quick());
  EXPECT_EQ(batch.front(), trust_score(m, xs.row(0), quick()));
}

TEST(BatchTrust, WorkerCountDoesNotChangeResults) {
  const auto m = small_model();
  const auto xs = random_rows(13, 6, 10);
  const auto one = batch_trust_scores(m, xs, quick(), 1);
  for (std::size_t w : {2u, 3u, 8u, 32u}) EXPECT_EQ(batch_trust_scores(m, xs, quick(), w), one);
}

TEST(BatchTrust, FailureCarriesLowestIndex) {
  const auto m = small_model();
  auto xs = random_rows(6, 6, 11);
  for (auto& v : xs.row(4)) v = std::numeric_limits<double>::max();
  for (auto& v : xs.row(2)) v = std::numeric_limits<double>::max();
  try {
    batch_trust_scores(m, xs, quick(), 3);
    FAIL() << "expected BatchError";
  } catch (const BatchError& e) {
    EXPECT_EQ(e.sample_index(), 2u);
    EXPECT_EQ(e.inner_kind(), "optimization");
  }
}

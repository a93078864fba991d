#include <cmath>

#include <gtest/gtest.h>

#include "trust/baselines.hpp"

using namespace trust;

namespace {

Mlp net_with_logits(const Vector& logits, double dropout = 0.0) {
  auto m = Mlp::init({{2, 3, logits.size()}, dropout, 1});
  for (auto& w : m.weights) std::fill(w.values().begin(), w.values().end(), 0.0);
  m.biases.back() = logits;
  return m;
}

}  // namespace

TEST(Entropy, Examples) {
  EXPECT_EQ(entropy(Vector{0, 1, 0}), 0.0);
  EXPECT_NEAR(entropy(Vector{0.25, 0.25, 0.25, 0.25}), std::log(4.0), 1e-15);
  EXPECT_NEAR(entropy(Vector{0.5, 0.25, 0.25}), 1.5 * std::log(2.0), 1e-15);
  EXPECT_NEAR(entropy(Vector{0.5, 0.25, 0.25}), 1.039721, 5e-7);
}

TEST(Entropy, RejectsNonDistributions) {
  EXPECT_THROW(entropy(Vector{0.5, 0.6}), DomainError);
  EXPECT_THROW(entropy(Vector{-0.1, 1.1}), DomainError);
  EXPECT_THROW(entropy(Vector{}), DomainError);
}

TEST(Msp, Examples) {
  EXPECT_NEAR(msp_score(net_with_logits(Vector(10, 0.0)), Vector{1, 1}), 0.1, 1e-15);
  EXPECT_NEAR(msp_score(net_with_logits(Vector{5, 0}), Vector{1, 1}), 1.0 / (1.0 + std::exp(-5.0)),
              1e-15);
  EXPECT_NEAR(msp_score(net_with_logits(Vector{5, 0}), Vector{1, 1}), 0.993307, 5e-7);
}

TEST(McDropout, NeedsDropout) {
  EXPECT_THROW(mc_dropout_score(net_with_logits(Vector{1, 0}), Vector{1, 1}, {}), ConfigError);
}

TEST(McDropout, DeterministicUnderSeed) {
  const auto m = Mlp::init({{4, 16, 3}, 0.3, 5});
  const Vector x{0.1, -0.4, 0.9, 1.3};
  const auto a = mc_dropout_score(m, x, {50, 77});
  const auto b = mc_dropout_score(m, x, {50, 77});
  EXPECT_EQ(a.score, b.score);
  EXPECT_EQ(a.mean_probs, b.mean_probs);
}

TEST(McDropout, ScoreWithinEntropyRange) {
  const auto m = Mlp::init({{4, 16, 3}, 0.3, 5});
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto r = mc_dropout_score(m, Vector{0.5, 0.5, -1.0, 2.0}, {10, s});
    EXPECT_LE(r.score, 0.0);
    EXPECT_GE(r.score, -std::log(3.0) - 1e-12);
  }
}

TEST(McDropout, MorePassesReduceSpread) {
  const auto m = Mlp::init({{4, 32, 3}, 0.5, 6});
  const Vector x{0.2, 1.0, -0.7, 0.3};
  auto spread = [&](std::size_t passes) {
    std::vector<double> v;
    for (std::uint64_t s = 0; s < 20; ++s) v.push_back(mc_dropout_score(m, x, {passes, s}).score);
    double mean = 0.0;
    for (double e : v) mean += e;
    mean /= 20.0;
    double ss = 0.0;
    for (double e : v) ss += (e - mean) * (e - mean);
    return std::sqrt(ss / 19.0);
  };
  EXPECT_LT(spread(50), spread(5));
}

TEST(SampleSeed, DistinctAndStable) {
  EXPECT_EQ(sample_seed(1, 2), sample_seed(1, 2));
  EXPECT_NE(sample_seed(1, 2), sample_seed(1, 3));
  EXPECT_NE(sample_seed(1, 2), sample_seed(2, 2));
}

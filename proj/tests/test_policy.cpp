#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "intervene/gradcheck.hpp"
#include "intervene/learner.hpp"
#include "intervene/policy.hpp"
#include "intervene/scm.hpp"
#include "test_support.hpp"

using namespace intervene;

namespace {

const ValueGrid kGrid(Interval{-5.0, 5.0});

TrainablePolicy random_policy(std::uint64_t seed, std::size_t hidden = 16, double scale = 0.5) {
  Rng rng(seed);
  TrainablePolicy p(16, 5, kGrid, hidden, rng);
  for (auto& w : p.params()) w = uniform(rng, -scale, scale);
  return p;
}

std::vector<double> random_features(Rng& rng, std::size_t n = 16) {
  std::vector<double> f(n);
  for (auto& x : f) x = uniform(rng, 0.0, 1.0);
  return f;
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST(ValueGrid, CentersAndSnap) {
  EXPECT_EQ(kGrid.size(), 41u);
  EXPECT_EQ(kGrid.center(0), -5.0);
  EXPECT_EQ(kGrid.center(40), 5.0);
  EXPECT_EQ(kGrid.snap(0.25), 21u);
  EXPECT_EQ(kGrid.snap(0.25 + 5e-10), 21u);
  EXPECT_FALSE(kGrid.snap(0.3));
  EXPECT_EQ(kGrid.nearest(0.3), 21u);
  EXPECT_EQ(kGrid.nearest(9.0), 40u);
  EXPECT_EQ(ValueGrid(Interval{0.0, 0.0}).size(), 1u);
}

TEST(Featurize, LayoutAndRange) {
  History h(5, kGrid);
  const auto f0 = featurize(std::vector<double>(5, 0.0), h, 0, 100);
  EXPECT_EQ(f0.size(), 16u);
  for (double x : f0) EXPECT_EQ(x, 0.0);

  h.record({2, 1.0});
  h.record({2, 1.0});
  h.record({4, -3.0});
  const auto f = featurize({1.0, 3.0, 0.0, 1e300, 0.5}, h, 50, 100);
  EXPECT_DOUBLE_EQ(f[0], 0.5);
  EXPECT_DOUBLE_EQ(f[1], 0.75);
  EXPECT_DOUBLE_EQ(f[3], 1.0);
  EXPECT_DOUBLE_EQ(f[5 + 2], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(f[5 + 4], 1.0 / 3.0);
  EXPECT_EQ(f[10 + 4], 1.0);
  EXPECT_EQ(f[10 + 2], 0.0);
  EXPECT_DOUBLE_EQ(f[15], 0.5);
  for (double x : f) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
  EXPECT_EQ(featurize(std::vector<double>(5, 0.0), h, 500, 100)[15], 1.0);
}

TEST(Featurize, RequiresEvaluatedLedger) {
  History h(5, kGrid);
  EXPECT_ERRC(featurize({}, h, 0, 10), Errc::LedgerUninitialized);
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_ERRC(featurize({inf, inf, inf, inf, inf}, h, 0, 10), Errc::LedgerUninitialized);
}

TEST(History, Counts) {
  History h(5, kGrid);
  EXPECT_FALSE(h.last_node());
  h.record({1, 0.25});
  h.record({1, 0.25});
  h.record({3, -5.0});
  EXPECT_EQ(h.total(), 3u);
  EXPECT_EQ(h.node_count(1), 2u);
  EXPECT_EQ(h.bin_count(1, 21), 2u);
  EXPECT_EQ(h.bin_count(3, 0), 1u);
  EXPECT_EQ(h.last_node(), 3u);
}

TEST(Policy, UniformAtInitialization) {
  Rng rng(1);
  TrainablePolicy p(16, 5, kGrid, 64, rng);
  const double expect = -(std::log(5.0) + std::log(41.0));
  const std::vector<double> f(16, 0.3);
  for (const auto& c : p.propose(f, 4, 0.7, rng)) {
    EXPECT_NEAR(c.log_prob, expect, 1e-12);
    EXPECT_TRUE(kGrid.snap(c.iv.value));
  }
  EXPECT_NEAR(p.log_prob(f, {3, 1.75}), expect, 1e-12);
  EXPECT_EQ(p.propose(f, 4, 0.7, rng).size(), 4u);
}

TEST(Policy, NormalizedOverFullGrid) {
  Rng rng(2);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto p = random_policy(s, 16, 2.0);
    const auto f = random_features(rng);
    double total = 0.0;
    for (std::size_t n = 0; n < 5; ++n) {
      for (std::size_t b = 0; b < kGrid.size(); ++b) total += std::exp(p.log_prob(f, {n, kGrid.center(b)}));
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Policy, LogProbErrors) {
  const auto p = random_policy(1);
  const std::vector<double> f(16, 0.5);
  EXPECT_ERRC(p.log_prob(f, {0, 0.1}), Errc::ValueNotOnGrid);
  EXPECT_ERRC(p.log_prob(f, {7, 0.0}), Errc::InvalidIndex);
  Rng rng(0);
  EXPECT_ERRC(p.propose(f, 2, 0.0, rng), Errc::InvalidArgument);
}

TEST(Policy, LogProbGradientMatchesFiniteDifferences) {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto p = random_policy(s, 8);
    Rng rng(s + 500);
    const auto f = random_features(rng);
    const Intervention iv{uniform_index(rng, 5), kGrid.center(uniform_index(rng, 41))};
    std::vector<double> grad(p.param_count(), 0.0);
    p.log_prob_grad(f, iv, grad);
    worst = std::max(worst, max_fd_relative_error(p.params(), grad, [&] { return p.log_prob(f, iv); }));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Policy, EntropyGradientMatchesFiniteDifferences) {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto p = random_policy(s, 8);
    Rng rng(s + 900);
    const auto f = random_features(rng);
    std::vector<double> grad(p.param_count(), 0.0);
    p.entropy(f, grad);
    worst = std::max(worst, max_fd_relative_error(p.params(), grad, [&] { return p.entropy(f); }));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Policy, LowTemperatureProposesArgmax) {
  const auto p = random_policy(3, 16, 2.0);
  Rng rng(3);
  const auto f = random_features(rng);
  const auto fw = p.forward(f);
  const auto cands = p.propose(f, 4, 1e-4, rng);
  for (const auto& c : cands) {
    EXPECT_EQ(c.iv.node, argmax(fw.node_logp));
    EXPECT_EQ(c.iv.value, kGrid.center(argmax(fw.bin_logp)));
    EXPECT_NEAR(c.log_prob, fw.node_logp[c.iv.node] + fw.bin_logp[*kGrid.snap(c.iv.value)], 1e-12);
  }
}

TEST(Policy, ProposeIsReproducible) {
  const auto p = random_policy(4);
  const std::vector<double> f(16, 0.2);
  Rng a(7), b(7);
  const auto x = p.propose(f, 8, 0.7, a);
  const auto y = p.propose(f, 8, 0.7, b);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(x[i].iv, y[i].iv);
    EXPECT_EQ(x[i].log_prob, y[i].log_prob);
    EXPECT_TRUE(std::isfinite(x[i].log_prob));
    EXPECT_LE(x[i].log_prob, 0.0);
  }
}

TEST(Policy, ArgmaxInvariantUnderLogitScaling) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> logits(41);
    for (auto& l : logits) l = standard_normal(rng);
    const double c = uniform(rng, 0.1, 10.0);
    std::vector<double> scaled(logits);
    for (auto& l : scaled) l *= c;
    const auto a = log_softmax(logits);
    const auto b = log_softmax(scaled);
    EXPECT_EQ(argmax(a), argmax(b));
    double total = 0.0;
    for (double v : b) total += std::exp(v);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Policy, EquivariantUnderNodeRelabeling) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_policy(100 + trial, 16, 1.0);
    std::vector<std::size_t> perm(5);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto q = p.relabeled(perm);
    const auto f = random_features(rng);
    std::vector<double> g(16);
    for (std::size_t block = 0; block < 3; ++block) {
      for (std::size_t j = 0; j < 5; ++j) g[block * 5 + j] = f[block * 5 + perm[j]];
    }
    g[15] = f[15];
    const auto a = p.forward(f);
    const auto b = q.forward(g);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(b.node_logp[j], a.node_logp[perm[j]], 1e-12);
    for (std::size_t k = 0; k < 41; ++k) EXPECT_NEAR(b.bin_logp[k], a.bin_logp[k], 1e-12);
  }
}

TEST(Policy, JsonRoundTrip) {
  auto p = random_policy(8);
  std::vector<double> grad(p.param_count(), 0.01);
  p.apply_gradient(grad, 1e-3);
  const auto j = p.to_json();
  EXPECT_EQ(j["kind"], "policy");
  EXPECT_TRUE(j["tensors"].contains("policy.w1"));
  const auto q = TrainablePolicy::from_json(nlohmann::json::parse(j.dump()));
  EXPECT_TRUE(q == p);
}

TEST(RandomPolicy, RangeFrequenciesAndDensity) {
  Rng rng(42);
  const auto cands = propose_random(5, {-5, 5}, 100000, rng);
  std::vector<double> counts(5, 0.0);
  for (const auto& c : cands) {
    EXPECT_GE(c.iv.value, -5.0);
    EXPECT_LE(c.iv.value, 5.0);
    counts[c.iv.node] += 1.0;
  }
  const double sigma = std::sqrt(100000.0 * 0.2 * 0.8);
  for (double c : counts) EXPECT_LT(std::abs(c - 20000.0), 3.0 * sigma);
  EXPECT_NEAR(cands[0].log_prob, -(std::log(5.0) + std::log(10.0)), 1e-12);
}

TEST(RoundRobin, Schedule) {
  EXPECT_EQ(propose_round_robin(0, 5).iv.node, 0u);
  EXPECT_EQ(propose_round_robin(5, 5).iv.node, 0u);
  EXPECT_EQ(propose_round_robin(7, 5).iv.node, 2u);
  EXPECT_EQ(propose_round_robin(0, 5).iv.value, -4.0);
  EXPECT_EQ(propose_round_robin(5, 5).iv.value, -2.0);
  EXPECT_EQ(propose_round_robin(25, 5).iv.value, -4.0);
}

TEST(MaxVariance, ZeroDropoutTieBreak) {
  LearnerConfig cfg;
  cfg.dropout = 0.0;
  Rng rng(1);
  MechanismLearner l(std::make_shared<const CausalGraph>(build_benchmark_5node().graph()), cfg, rng);
  const auto grid = integer_grid({-5, 5});
  EXPECT_EQ(grid.size(), 11u);
  const auto c = propose_max_variance(l, grid, 20, 9);
  EXPECT_EQ(c.iv.node, 0u);
  EXPECT_EQ(c.iv.value, -5.0);
}

TEST(MaxVariance, ParallelMatchesSerialAndValueOnGrid) {
  Rng rng(2);
  MechanismLearner l(std::make_shared<const CausalGraph>(build_benchmark_15node().graph()), LearnerConfig{}, rng);
  const auto grid = integer_grid({-5, 5});
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto a = propose_max_variance(l, grid, 20, seed);
    const auto b = propose_max_variance_serial(l, grid, 20, seed);
    EXPECT_EQ(a.iv, b.iv);
    EXPECT_NE(std::find(grid.begin(), grid.end(), a.iv.value), grid.end());
  }
}

TEST(MaxVariance, HigherDropoutGivesMoreVariance) {
  std::size_t wins = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng init(s);
    MechanismLearner lo(std::make_shared<const CausalGraph>(build_benchmark_5node().graph()), LearnerConfig{}, init);
    MechanismLearner hi = lo;
    lo.set_dropout(0.05);
    hi.set_dropout(0.3);
    Rng a(s + 77), b(s + 77);
    const double vl = children_sum_variance(lo, {0, 2.0}, 50, a);
    const double vh = children_sum_variance(hi, {0, 2.0}, 50, b);
    if (vh >= vl) ++wins;
  }
  EXPECT_GE(wins, 18u);
}

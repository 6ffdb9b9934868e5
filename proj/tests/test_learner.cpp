#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "intervene/gradcheck.hpp"
#include "intervene/learner.hpp"
#include "intervene/scm.hpp"
#include "test_support.hpp"

using namespace intervene;

namespace {

std::shared_ptr<const CausalGraph> five_graph() {
  return std::make_shared<const CausalGraph>(build_benchmark_5node().graph());
}

MechanismLearner fresh(std::uint64_t seed, LearnerConfig cfg = {}) {
  Rng rng(seed);
  return MechanismLearner(five_graph(), cfg, rng);
}

// 500 rows under do(X1 = u) for 50 values spread over [-5, 5].
Dataset x1_sweep(const OracleScm& scm, Rng& rng) {
  Dataset all(500, 5);
  for (std::size_t k = 0; k < 50; ++k) {
    const double u = -5.0 + 10.0 * static_cast<double>(k) / 49.0;
    const auto part = sample(scm, Intervention{0, u}, 10, rng);
    for (std::size_t r = 0; r < 10; ++r) {
      for (std::size_t c = 0; c < 5; ++c) all.at(k * 10 + r, c) = part.at(r, c);
    }
  }
  return all;
}

void train_node(MechanismLearner& l, std::size_t node, const Dataset& data, std::size_t steps, double lr,
                std::size_t batch, Rng& rng) {
  Dataset mb(batch, data.cols());
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t r = 0; r < batch; ++r) {
      const std::size_t src = uniform_index(rng, data.rows());
      for (std::size_t c = 0; c < data.cols(); ++c) mb.at(r, c) = data.at(src, c);
    }
    l.train_step(node, mb, lr);
  }
}

double predict1(const MechanismLearner& l, std::size_t node, double x) {
  const double in[] = {x};
  return l.predict(node, in);
}

}  // namespace

TEST(Learner, InitShapesAndDeterminism) {
  auto a = fresh(3);
  auto b = fresh(3);
  EXPECT_TRUE(a == b);
  EXPECT_EQ(a.network(2).input_dim(), 2u);
  EXPECT_EQ(a.network(2).hidden_dim(), 64u);
  EXPECT_EQ(a.root_mean(0), 0.0);
  EXPECT_EQ(a.root_std(0), 1.0);
  EXPECT_FALSE(a.ledger_initialized());
  EXPECT_EQ(a.buffer_rows(), 0u);
}

TEST(Learner, RootHasNoPredictor) {
  auto a = fresh(1);
  const double in[] = {0.0};
  EXPECT_ERRC(a.predict(0, in), Errc::RootHasNoPredictor);
}

TEST(Learner, ZeroWeightsGiveOutputBias) {
  auto a = fresh(1);
  auto p = a.node_params(1);
  std::fill(p.begin(), p.end(), 0.0);
  p.back() = 0.37;
  EXPECT_EQ(predict1(a, 1, 2.5), 0.37);
}

TEST(Learner, DeterministicModeRepeats) {
  auto a = fresh(2);
  Rng rng(0);
  EXPECT_EQ(predict1(a, 1, 1.3), predict1(a, 1, 1.3));
  const double in[] = {1.3};
  double s1 = a.predict(1, in, true, &rng);
  double s2 = a.predict(1, in, true, &rng);
  EXPECT_NE(s1, s2);
}

TEST(Learner, FitsLinearMechanismOnZeroNoiseSweep) {
  const auto scm = build_benchmark_5node().without_noise();
  Rng rng(10);
  const auto data = x1_sweep(scm, rng);
  auto l = fresh(10);
  train_node(l, 1, data, 3000, 2e-3, 32, rng);
  EXPECT_NEAR(predict1(l, 1, -4.0), -7.0, 0.1);
  EXPECT_NEAR(predict1(l, 1, 0.0), 1.0, 0.1);
  EXPECT_NEAR(predict1(l, 1, 4.0), 9.0, 0.1);
}

TEST(Learner, FirstAdamStepIsBoundedByLearningRate) {
  auto l = fresh(4);
  Rng rng(4);
  const auto batch = sample(build_benchmark_5node(), std::nullopt, 32, rng);
  const std::vector<double> before(l.node_params(2).begin(), l.node_params(2).end());
  std::vector<double> grad(before.size(), 0.0);
  l.loss_and_gradient(2, batch, grad);
  const double lr = 2e-3;
  l.train_step(2, batch, lr);
  const auto after = l.node_params(2);
  for (std::size_t i = 0; i < before.size(); ++i) {
    const double moved = std::abs(after[i] - before[i]);
    EXPECT_LE(moved, lr * (1.0 + 1e-9));
    // Bias-corrected first step: lr * g / (|g| + eps).
    const double expected = lr * std::abs(grad[i]) / (std::abs(grad[i]) + 1e-8);
    EXPECT_NEAR(moved, expected, 1e-12);
  }
}

TEST(Learner, ZeroGradientLeavesParametersUnchanged) {
  auto l = fresh(5);
  auto p = l.node_params(4);
  std::fill(p.begin(), p.end(), 0.0);
  Dataset batch(8, 5);  // all zeros: X5 = 0 matches the zero network
  const std::vector<double> before(p.begin(), p.end());
  l.train_step(4, batch, 2e-3);
  const auto after = l.node_params(4);
  EXPECT_TRUE(std::equal(before.begin(), before.end(), after.begin()));
}

TEST(Learner, RootModelRecoversMean) {
  auto l = fresh(6);
  Rng rng(6);
  Dataset data(1000, 5);
  for (std::size_t r = 0; r < 1000; ++r) data.at(r, 3) = 2.0 + standard_normal(rng);
  for (int s = 0; s < 500; ++s) l.train_step(3, data, 1e-2);
  EXPECT_NEAR(l.root_mean(3), 2.0, 0.1);
}

TEST(Learner, EmptyBatchThrows) {
  auto l = fresh(1);
  EXPECT_ERRC(l.train_step(1, Dataset(0, 5), 1e-3), Errc::EmptyBatch);
}

TEST(Learner, RootFilterIsExact) {
  Rng rng(7);
  const auto scm = build_benchmark_5node();
  const auto obs = sample(scm, std::nullopt, 64, rng);
  const auto intv = sample(scm, Intervention{0, 3.0}, 64, rng);
  auto with = fresh(7);
  auto without = fresh(7);
  for (int s = 0; s < 50; ++s) {
    EXPECT_EQ(with.train_step(0, intv, 1e-2), 0.0);
    with.train_step(0, obs, 1e-2);
    without.train_step(0, obs, 1e-2);
  }
  EXPECT_TRUE(std::equal(with.node_params(0).begin(), with.node_params(0).end(), without.node_params(0).begin()));
  EXPECT_EQ(with.optimizer(0), without.optimizer(0));

  std::vector<double> g(2, 0.0);
  EXPECT_EQ(with.loss_and_gradient(0, intv, g), 0.0);
  EXPECT_EQ(g, (std::vector<double>{0.0, 0.0}));
}

TEST(Learner, PredictorGradientMatchesFiniteDifferences) {
  const auto scm = build_benchmark_5node();
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    LearnerConfig cfg;
    cfg.dropout = 0.0;
    auto l = fresh(1000 + s, cfg);
    Rng rng(s);
    const auto batch = sample(scm, std::nullopt, 16, rng);
    const std::size_t node = std::array<std::size_t, 3>{1, 2, 4}[s % 3];
    std::vector<double> grad(l.node_params(node).size(), 0.0);
    l.loss_and_gradient(node, batch, grad);
    std::vector<double> scratch;
    worst = std::max(worst, max_fd_relative_error(l.node_params(node), grad,
                                                  [&] { return l.loss_and_gradient(node, batch, scratch); }));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Learner, RootNllGradientMatchesFiniteDifferences) {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto l = fresh(s);
    Rng rng(s + 7);
    auto p = l.node_params(3);
    p[0] = uniform(rng, -2, 2);
    p[1] = uniform(rng, -1, 1);
    const auto batch = sample(build_benchmark_5node(), std::nullopt, 16, rng);
    std::vector<double> grad(2, 0.0);
    l.loss_and_gradient(3, batch, grad);
    std::vector<double> scratch;
    worst = std::max(worst, max_fd_relative_error(l.node_params(3), grad,
                                                  [&] { return l.loss_and_gradient(3, batch, scratch); }));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Learner, GaussianNllClosedForm) {
  const std::vector<double> v{1.0, 2.0, 4.0};
  const double mu = 1.5, ls = 0.3;
  double expect = 0.0;
  for (double x : v) expect += 0.5 * std::log(2 * M_PI) + ls + 0.5 * (x - mu) * (x - mu) / std::exp(2 * ls);
  EXPECT_NEAR(gaussian_nll(mu, ls, v), expect / 3.0, 1e-12);
}

TEST(Learner, TrainingReducesLossOnFixedData) {
  const auto scm = build_benchmark_5node().without_noise();
  Rng rng(9);
  const auto batch = sample(scm, std::nullopt, 64, rng);
  auto l = fresh(9);
  for (std::size_t node : {1u, 2u, 4u}) {
    std::vector<double> g;
    const double start = l.loss_and_gradient(node, batch, g);
    for (int s = 0; s < 200; ++s) l.train_step(node, batch, 2e-3);
    EXPECT_LT(l.loss_and_gradient(node, batch, g), start) << node;
  }
}

TEST(Learner, EvaluateZeroPredictorAgainstClosedForm) {
  const auto scm = build_benchmark_5node();
  Rng rng(3);
  ValidationSet val{{sample(scm, Intervention{0, 1.0}, 200, rng)}};
  auto l = fresh(3);
  auto p = l.node_params(1);
  std::fill(p.begin(), p.end(), 0.0);
  const auto& ledger = l.evaluate(val);
  EXPECT_NEAR(ledger[1], 9.0, 0.01);
  double total = 0.0;
  for (double v : ledger) total += v;
  EXPECT_DOUBLE_EQ(l.total_loss(), total);
}

TEST(Learner, RootLedgerIsMomentMismatch) {
  const auto scm = build_benchmark_5node();
  Rng rng(3);
  ValidationSet val{{sample(scm, std::nullopt, 300, rng)}};
  auto l = fresh(3);
  const auto col = val.parts[0].column(3);
  double m = 0.0;
  for (double v : col) m += v;
  m /= static_cast<double>(col.size());
  double s = 0.0;
  for (double v : col) s += (v - m) * (v - m);
  s = std::sqrt(s / static_cast<double>(col.size()));
  const auto& ledger = l.evaluate(val);
  EXPECT_NEAR(ledger[3], (0.0 - m) * (0.0 - m) + (1.0 - s) * (1.0 - s), 1e-6);
}

TEST(Learner, PerfectZeroNoiseLearnerHasZeroPredictorLoss) {
  // X5 = 0.2 X4^2 on X4 in {0}: a zero network matches exactly.
  auto l = fresh(2);
  auto p = l.node_params(4);
  std::fill(p.begin(), p.end(), 0.0);
  Dataset d(10, 5, Intervention{3, 0.0});
  ValidationSet val{{d}};
  EXPECT_EQ(l.evaluate(val)[4], 0.0);
}

TEST(Learner, EvaluateIsReadOnlyAndParallelMatchesSerial) {
  const auto scm = build_benchmark_15node();
  Rng rng(4);
  ValidationSet val{{sample(scm, std::nullopt, 200, rng), sample(scm, Intervention{2, 1.0}, 40, rng)}};
  Rng lr(4);
  MechanismLearner l(std::make_shared<const CausalGraph>(scm.graph()), LearnerConfig{}, lr);
  const auto snapshot = l.to_json();
  EXPECT_EQ(l.validation_losses(val), l.validation_losses_serial(val));
  l.evaluate(val);
  auto after = l.to_json();
  after.erase("ledger");
  auto before = snapshot;
  before.erase("ledger");
  EXPECT_EQ(after, before);
}

TEST(Learner, CloneIsolation) {
  const auto scm = build_benchmark_5node();
  Rng rng(5);
  ValidationSet val{{sample(scm, std::nullopt, 200, rng)}};
  auto l = fresh(5);
  l.observe(sample(scm, std::nullopt, 64, rng));
  l.evaluate(val);
  const auto before = l.to_json();
  auto c = l.clone();
  auto* mc = dynamic_cast<MechanismLearner*>(c.get());
  ASSERT_NE(mc, nullptr);
  EXPECT_EQ(predict1(*mc, 1, 0.7), predict1(l, 1, 0.7));
  for (int s = 0; s < 1000; ++s) c->fit_episode(rng);
  c->observe(sample(scm, Intervention{0, 2.0}, 16, rng));
  c->evaluate(val);
  EXPECT_EQ(l.to_json(), before);
  EXPECT_EQ(l.buffer_rows(), 64u);
}

TEST(Learner, McDropoutVariance) {
  auto l = fresh(6);
  const double in[] = {0.5};
  Rng a(1), b(1);
  const double v1 = l.mc_dropout_variance(1, in, 50, a);
  EXPECT_GE(v1, 0.0);
  EXPECT_EQ(v1, l.mc_dropout_variance(1, in, 50, b));
  l.set_dropout(0.0);
  Rng c(1);
  EXPECT_EQ(l.mc_dropout_variance(1, in, 50, c), 0.0);
  EXPECT_ERRC(l.mc_dropout_variance(1, in, 1, c), Errc::InvalidArgument);
  EXPECT_ERRC(l.mc_dropout_variance(0, in, 5, c), Errc::RootHasNoPredictor);
}

TEST(Learner, CheckpointRoundTrip) {
  const auto scm = build_benchmark_5node();
  Rng rng(2);
  auto l = fresh(2);
  l.observe(sample(scm, std::nullopt, 64, rng));
  for (int e = 0; e < 3; ++e) l.fit_episode(rng);
  ValidationSet val{{sample(scm, std::nullopt, 50, rng)}};
  l.evaluate(val);
  const auto j = l.to_json();
  EXPECT_TRUE(j["tensors"].contains("X3.w1"));
  EXPECT_TRUE(j["tensors"].contains("X1.root"));
  EXPECT_EQ(j["tensors"]["X3.w1"]["shape"], nlohmann::json::array({64, 2}));
  const auto back = MechanismLearner::from_json(nlohmann::json::parse(j.dump()), five_graph());
  EXPECT_EQ(back.to_json(), j);
  EXPECT_EQ(predict1(back, 1, 1.1), predict1(l, 1, 1.1));
}

TEST(Learner, NoRootLearnerTreatsRootsAsPredictors) {
  LearnerConfig cfg;
  cfg.root_learner = false;
  auto l = fresh(1, cfg);
  EXPECT_FALSE(l.has_root_model(0));
  EXPECT_NO_THROW(l.predict(0, std::span<const double>{}));
}

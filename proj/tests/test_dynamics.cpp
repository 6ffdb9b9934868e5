#include <cmath>

#include <gtest/gtest.h>

#include "intervene/duffing.hpp"
#include "intervene/stats.hpp"
#include "test_support.hpp"

using namespace intervene;

namespace {

DuffingParams harmonic(double dt) {
  DuffingParams p;
  p.delta = 0.0;
  p.beta = 0.0;
  p.k = 0.0;
  p.alpha = 1.0;
  p.forcing_amplitude = {0.0, 0.0, 0.0};
  p.dt = dt;
  return p;
}

double harmonic_error(double dt, double horizon) {
  const auto p = harmonic(dt);
  OscState s{{1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, 0.0};
  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
  for (std::size_t i = 0; i < steps; ++i) s = rk4_step(s, p, std::nullopt);
  return std::abs(s.x[0] - std::cos(horizon));
}

double abs_corr(const Dataset& d, std::size_t a, std::size_t b) { return std::abs(correlation(d.column(a), d.column(b))); }

}  // namespace

TEST(Duffing, EquilibriumHasZeroAcceleration) {
  DuffingParams p;
  p.forcing_amplitude = {0.0, 0.0, 0.0};
  const auto a = acceleration({{0, 0, 0}, {0, 0, 0}, 0.0}, p, std::nullopt);
  for (double v : a) EXPECT_EQ(v, 0.0);
}

TEST(Duffing, CouplingFormulaByHand) {
  DuffingParams p;
  p.alpha = 1.0;
  p.beta = 0.0;
  p.delta = 0.0;
  p.k = 0.5;
  p.forcing_amplitude = {0.0, 0.0, 0.0};
  const auto a = acceleration({{1, 0, 0}, {0, 0, 0}, 0.0}, p, std::nullopt);
  EXPECT_DOUBLE_EQ(a[0], -1.5);
  EXPECT_DOUBLE_EQ(a[1], 0.5);
  EXPECT_DOUBLE_EQ(a[2], 0.0);
}

TEST(Duffing, ClampedOscillatorHasZeroAcceleration) {
  DuffingParams p;
  const auto a = acceleration({{1, 0, 1}, {0, 0, 0}, 0.0}, p, Clamp{1, 0.0});
  EXPECT_EQ(a[1], 0.0);
}

TEST(Duffing, HarmonicLimit) { EXPECT_LT(harmonic_error(0.01, 10.0), 1e-6); }

TEST(Duffing, FourthOrderConvergence) {
  const double coarse = harmonic_error(0.02, 10.0);
  const double fine = harmonic_error(0.01, 10.0);
  EXPECT_GE(coarse / fine, 12.0) << coarse << " vs " << fine;
}

TEST(Duffing, EnergyConservedWithoutDampingForcingOrCoupling) {
  DuffingParams p;
  p.delta = 0.0;
  p.k = 0.0;
  p.forcing_amplitude = {0.0, 0.0, 0.0};
  OscState s{{1.2, 0.0, 0.0}, {0.3, 0.0, 0.0}, 0.0};
  const double e0 = oscillator_energy(s, p, 0);
  double drift = 0.0;
  for (int i = 0; i < 10000; ++i) {
    s = rk4_step(s, p, std::nullopt);
    drift = std::max(drift, std::abs(oscillator_energy(s, p, 0) - e0));
  }
  EXPECT_LT(drift, 1e-7);
}

TEST(Duffing, ClampIsExact) {
  DuffingParams p;
  Rng rng(4);
  const auto d = sample_trajectory(p, Clamp{1, 2.0}, 2000, 10, rng);
  for (double v : d.column(1)) EXPECT_EQ(v, 2.0);
  Rng rng0(4);
  const auto z = sample_trajectory(p, Clamp{0, 0.0}, 500, 10, rng0);
  for (double v : z.column(0)) EXPECT_EQ(v, 0.0);
}

TEST(Duffing, TrajectoryShapeAndDeterminism) {
  DuffingParams p;
  Rng a(8), b(8);
  const auto d = sample_trajectory(p, std::nullopt, 1000, 10, a);
  EXPECT_EQ(d.rows(), 100u);
  EXPECT_EQ(d.times().size(), 100u);
  EXPECT_EQ(d, sample_trajectory(p, std::nullopt, 1000, 10, b));
  EXPECT_ERRC(sample_trajectory(p, std::nullopt, 5, 10, a), Errc::InvalidArgument);
}

TEST(Duffing, BlowUpDetected) {
  DuffingParams p;
  p.alpha = -1.0;
  p.beta = -5.0;
  OscState s{{50.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, 0.0};
  EXPECT_ERRC(
      for (int i = 0; i < 100000; ++i) s = rk4_step(s, p, std::nullopt), Errc::NonFiniteState);
}

TEST(Duffing, SpuriousCorrelationAndClampBreaksIt) {
  DuffingParams p;
  std::size_t strong = 0, reduced = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng free_rng(seed), clamp_rng(seed);
    const auto free = sample_trajectory(p, std::nullopt, 2000, 10, free_rng);
    const auto clamped = sample_trajectory(p, Clamp{1, 0.0}, 2000, 10, clamp_rng);
    if (abs_corr(free, 0, 2) > 0.2) ++strong;
    if (abs_corr(clamped, 0, 2) < abs_corr(free, 0, 2)) ++reduced;
  }
  EXPECT_GE(strong, 19u);
  EXPECT_GE(reduced, 19u);
}

TEST(Duffing, CouplingErrorExamples) {
  EXPECT_EQ(coupling_error(0.5, 0.5), 0.0);
  EXPECT_NEAR(coupling_error(0.542, 0.5), 0.042, 1e-12);
  EXPECT_NEAR(coupling_error(0.3, 0.5), 0.2, 1e-12);
}

TEST(Duffing, ParamsJsonRoundTrip) {
  DuffingParams p;
  p.k = 0.3;
  p.n_osc = 4;
  p.forcing_amplitude = {1, 0, 0, 0.5};
  p.forcing_frequency = {0.4, 0.4, 0.4, 0.9};
  const auto q = duffing_from_json(duffing_to_json(p));
  EXPECT_EQ(duffing_to_json(q), duffing_to_json(p));
  EXPECT_EQ(q.n_osc, 4u);
}

TEST(Duffing, ValidateRejectsBadParams) {
  DuffingParams p;
  p.n_osc = 1;
  EXPECT_ERRC(p.validate(), Errc::InvalidArgument);
  DuffingParams q;
  q.dt = 0.0;
  EXPECT_ERRC(q.validate(), Errc::InvalidArgument);
}

TEST(CouplingLearner, RecoversCouplingFromClampedData) {
  DuffingParams p;
  CouplingLearner learner(p);
  Rng rng(3);
  for (std::size_t osc = 0; osc < 3; ++osc) {
    for (double v : {-2.0, 0.0, 2.0}) learner.observe(sample_trajectory(p, Clamp{osc, v}, 2000, 10, rng));
  }
  learner.observe(sample_trajectory(p, std::nullopt, 2000, 10, rng));
  learner.fit_episode(rng);
  EXPECT_LT(coupling_error(learner.coupling_estimate(), p.k), 0.05) << learner.coupling_estimate();
}

TEST(CouplingLearner, CloneIsIsolated) {
  DuffingParams p;
  CouplingLearner learner(p);
  Rng rng(5);
  learner.observe(sample_trajectory(p, std::nullopt, 2000, 10, rng));
  learner.fit_episode(rng);
  const double before = learner.coupling_estimate();
  auto c = learner.clone();
  c->fit_probe(sample_trajectory(p, Clamp{0, 1.0}, 1000, 10, rng), 5, 1e-3, 0, rng);
  EXPECT_EQ(learner.coupling_estimate(), before);
}

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "intervene/dataset.hpp"
#include "intervene/learner.hpp"
#include "intervene/rng.hpp"

namespace intervene {

/// Chain of Duffing oscillators
///   x_i'' + delta x_i' + alpha x_i + beta x_i^3 = F_i(t) + k (x_{i-1} - x_i) + k (x_{i+1} - x_i)
/// with F_i(t) = amplitude_i cos(frequency_i t). Boundary oscillators have one neighbour.
struct DuffingParams {
  double delta = 0.2;
  double alpha = 1.0;
  double beta = 0.5;
  double k = 0.5;
  std::size_t n_osc = 3;
  std::vector<double> forcing_amplitude{1.5, 0.0, 0.0};
  std::vector<double> forcing_frequency{0.4, 0.4, 0.4};
  double dt = 0.01;
  std::size_t burn_in = 1000;
  std::size_t stride = 10;

  /// Throws Error{InvalidArgument}.
  void validate() const;
  double forcing(std::size_t i, double t) const;
};

struct OscState {
  std::vector<double> x;
  std::vector<double> v;
  double t = 0.0;
};

/// Holds one oscillator at a fixed position with zero velocity.
struct Clamp {
  std::size_t index = 0;
  double value = 0.0;
};

std::vector<double> acceleration(const OscState& s, const DuffingParams& p, const std::optional<Clamp>& clamp);

/// Classical RK4 on (x, x'). Throws Error{NonFiniteState}.
OscState rk4_step(const OscState& s, const DuffingParams& p, const std::optional<Clamp>& clamp);

/// Positions U(-1,1), velocities U(-0.5,0.5), then the clamp applied.
OscState random_initial_state(const DuffingParams& p, const std::optional<Clamp>& clamp, Rng& rng);

/// Runs burn_in steps, then records positions every `stride` steps over
/// `horizon` steps (horizon / stride rows, timestamps attached).
/// Throws Error{InvalidArgument, NonFiniteState}.
Dataset sample_trajectory(const DuffingParams& p, const std::optional<Clamp>& clamp, std::size_t horizon,
                          std::size_t stride, Rng& rng);

/// x'^2/2 + alpha x^2/2 + beta x^4/4 for one oscillator (conserved when
/// delta = 0, F = 0, k = 0).
double oscillator_energy(const OscState& s, const DuffingParams& p, std::size_t i);

double coupling_error(double estimated_k, double true_k);

nlohmann::json duffing_to_json(const DuffingParams& p);
DuffingParams duffing_from_json(const nlohmann::json& j);

/// Per-oscillator linear model of the snapshot second difference,
///   (x[r+1] - 2x[r] + x[r-1]) / h^2 - F_i(t_r)
///     ~ c0 + c1 x_i + c2 x_i^3 + c3 v_i + c4 sum_j (x_j - x_i),
/// where v_i is the central-difference velocity. c4 is the coupling estimate.
/// Fit by ridge-stabilized least squares over all observed snapshots.
class CouplingLearner final : public Learner {
 public:
  static constexpr std::size_t kFeatures = 5;

  explicit CouplingLearner(DuffingParams params, double ridge = 1e-9);

  double coupling_estimate() const;
  const Eigen::Matrix<double, kFeatures, 1>& weights(std::size_t osc) const { return weights_.at(osc); }

  std::unique_ptr<Learner> clone() const override;
  std::size_t ledger_size() const override { return params_.n_osc; }
  void observe(const Dataset& data) override;
  void fit_episode(Rng& rng) override;
  void fit_probe(const Dataset& probe, std::size_t steps, double lr, std::size_t replay, Rng& rng) override;
  const std::vector<double>& evaluate(const ValidationSet& val) override;
  std::vector<double> validation_losses(const ValidationSet& val) const override;
  const std::vector<double>& ledger() const override { return ledger_; }
  std::size_t buffer_rows() const override { return rows_seen_; }

 private:
  using Vec = Eigen::Matrix<double, kFeatures, 1>;
  using Mat = Eigen::Matrix<double, kFeatures, kFeatures>;

  void accumulate(const Dataset& data);
  void solve();

  DuffingParams params_;
  double ridge_;
  std::vector<Mat> gram_;
  std::vector<Vec> moment_;
  std::vector<std::size_t> samples_;
  std::vector<Vec> weights_;
  std::vector<double> ledger_;
  std::size_t rows_seen_ = 0;
};

}  // namespace intervene

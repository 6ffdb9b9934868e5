#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "intervene/dataset.hpp"
#include "intervene/nn.hpp"
#include "intervene/rng.hpp"

namespace intervene {

class MechanismLearner;

/// Uniform grid of value bins over a closed interval. A degenerate interval
/// (lo == hi) gives a single bin, used for value-less actions.
class ValueGrid {
 public:
  ValueGrid() = default;
  explicit ValueGrid(Interval range, double step = 0.25);

  std::size_t size() const { return bins_; }
  double center(std::size_t b) const { return lo_ + step_ * static_cast<double>(b); }
  /// Exact bin for a value within 1e-9 of a center.
  std::optional<std::size_t> snap(double value) const;
  /// Closest bin, clamped to the grid.
  std::size_t nearest(double value) const;

  friend bool operator==(const ValueGrid&, const ValueGrid&) = default;

 private:
  double lo_ = -5.0;
  double step_ = 0.25;
  std::size_t bins_ = 41;
};

/// Executed interventions with per-node and per-(node, bin) counts.
class History {
 public:
  History(std::size_t n_actions, ValueGrid grid);

  void record(const Intervention& iv);
  std::size_t total() const { return executed_.size(); }
  std::size_t node_count(std::size_t node) const { return node_counts_.at(node); }
  std::size_t bin_count(std::size_t node, std::size_t bin) const { return bin_counts_.at(node * grid_.size() + bin); }
  const std::vector<std::size_t>& node_counts() const { return node_counts_; }
  const std::vector<Intervention>& executed() const { return executed_; }
  std::optional<std::size_t> last_node() const;
  const ValueGrid& grid() const { return grid_; }
  std::size_t n_actions() const { return node_counts_.size(); }

 private:
  ValueGrid grid_;
  std::vector<Intervention> executed_;
  std::vector<std::size_t> node_counts_;
  std::vector<std::size_t> bin_counts_;
};

/// [L_i/(1+L_i) per ledger entry, n_a/max(1,N) per action, one-hot of last
/// action, t/t_max]. Throws Error{LedgerUninitialized} when the ledger is empty
/// or still holds infinities.
std::vector<double> featurize(const std::vector<double>& ledger, const History& history, std::size_t t,
                              std::size_t t_max);

struct RewardBreakdown {
  double info_gain = 0.0;
  double importance = 0.0;
  double diversity = 0.0;
  double total = 0.0;

  static RewardBreakdown combine(double info_gain, double importance, double diversity, double alpha, double gamma);
};

struct Candidate {
  Intervention iv;
  double log_prob = 0.0;
  std::optional<RewardBreakdown> reward;
};

/// Two-head categorical policy: features -> hidden ReLU -> (node logits, bin logits).
class TrainablePolicy {
 public:
  struct Forward {
    TwoLayerNet::Cache cache;
    std::vector<double> node_logp;  // temperature 1
    std::vector<double> bin_logp;
  };

  TrainablePolicy() = default;
  TrainablePolicy(std::size_t n_features, std::size_t n_nodes, ValueGrid grid, std::size_t hidden, Rng& rng,
                  AdamConfig adam = {});

  std::size_t n_features() const { return net_.input_dim(); }
  std::size_t n_nodes() const { return n_nodes_; }
  const ValueGrid& grid() const { return grid_; }

  std::span<double> params() { return net_.params(); }
  std::span<const double> params() const { return net_.params(); }
  std::size_t param_count() const { return net_.param_count(); }
  const TwoLayerNet& network() const { return net_; }
  TwoLayerNet& network() { return net_; }
  const Adam& optimizer() const { return adam_; }

  Forward forward(std::span<const double> features) const;
  /// Accumulates d/dparams given gradients w.r.t. the node and bin logits.
  void backward(const Forward& f, std::span<const double> d_node_logits, std::span<const double> d_bin_logits,
                std::span<double> grad) const;

  /// K independent draws at the given temperature; log_prob is stored at temperature 1.
  /// Throws Error{InvalidArgument} for temperature <= 0.
  std::vector<Candidate> propose(std::span<const double> features, std::size_t k, double temperature, Rng& rng) const;

  /// log p(node) + log p(bin). Throws Error{ValueNotOnGrid, InvalidIndex}.
  double log_prob(std::span<const double> features, const Intervention& iv) const;
  /// Same, also accumulating scale * d log_prob / d params into grad.
  double log_prob_grad(std::span<const double> features, const Intervention& iv, std::span<double> grad,
                       double scale = 1.0) const;
  /// Entropy of the joint (node, bin) distribution, accumulating scale * dH/dparams when grad is non-empty.
  double entropy(std::span<const double> features, std::span<double> grad = {}, double scale = 1.0) const;

  /// One Adam step descending `grad`.
  void apply_gradient(std::span<const double> grad, double lr);
  void reset_optimizer() { adam_ = Adam(net_.param_count()); }

  /// Policy acting on relabeled nodes: new node j is old node perm[j]. Feature
  /// blocks are assumed to be (ledger, counts, last) each of length n_nodes.
  TrainablePolicy relabeled(const std::vector<std::size_t>& perm) const;

  /// Tensor map {"format","version","n_nodes","grid":{lo,step,bins},"tensors":{"policy.w1",...},"adam_steps"}.
  nlohmann::json to_json() const;
  static TrainablePolicy from_json(const nlohmann::json& j);

  friend bool operator==(const TrainablePolicy&, const TrainablePolicy&) = default;

 private:
  std::size_t n_nodes_ = 0;
  ValueGrid grid_;
  TwoLayerNet net_;
  Adam adam_;
};

/// Uniform node and uniform continuous value; log_prob = -(ln n + ln width)
/// (a density; width 0 drops the value term).
std::vector<Candidate> propose_random(std::size_t n_nodes, Interval range, std::size_t k, Rng& rng);

/// Node t mod n, value from the cyclic schedule indexed by t / n.
Candidate propose_round_robin(std::size_t t, std::size_t n_nodes,
                              const std::vector<double>& value_schedule = {-4.0, -2.0, 0.0, 2.0, 4.0});

/// Argmax over node x grid of the MC-dropout variance of the sum of the
/// node's children predictions under do(node = value). Ties: lowest node,
/// then lowest value. Grid cells are scored in parallel, each with its own
/// stream derived from `seed`.
Candidate propose_max_variance(const MechanismLearner& learner, const std::vector<double>& grid, std::size_t passes,
                               std::uint64_t seed);
Candidate propose_max_variance_serial(const MechanismLearner& learner, const std::vector<double>& grid,
                                      std::size_t passes, std::uint64_t seed);

/// Children-sum MC-dropout variance for one cell.
double children_sum_variance(const MechanismLearner& learner, const Intervention& iv, std::size_t passes, Rng& rng);

/// {-5, -4, ..., 5}.
std::vector<double> integer_grid(Interval range);

}  // namespace intervene

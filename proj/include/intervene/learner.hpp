#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "intervene/dataset.hpp"
#include "intervene/graph.hpp"
#include "intervene/nn.hpp"
#include "intervene/rng.hpp"

namespace intervene {

/// Frozen held-out data. Each part keeps its provenance so per-node losses can
/// skip rows where that node was set by intervention.
struct ValidationSet {
  std::vector<Dataset> parts;

  std::size_t rows() const;
};

/// The learner surface the experiment loop needs. Concrete learners add
/// their own model-specific operations.
class Learner {
 public:
  virtual ~Learner() = default;

  virtual std::unique_ptr<Learner> clone() const = 0;
  virtual std::size_t ledger_size() const = 0;

  /// Appends executed-intervention rows to the replay buffer.
  virtual void observe(const Dataset& data) = 0;
  /// One episode's worth of updates drawn from the buffer.
  virtual void fit_episode(Rng& rng) = 0;
  /// Lookahead training: `steps` updates at rate `lr` on the probe rows,
  /// each step also drawing `replay` rows from the buffer.
  virtual void fit_probe(const Dataset& probe, std::size_t steps, double lr, std::size_t replay, Rng& rng) = 0;

  /// Recomputes and stores the per-node loss ledger.
  virtual const std::vector<double>& evaluate(const ValidationSet& val) = 0;
  /// Same losses without touching the stored ledger.
  virtual std::vector<double> validation_losses(const ValidationSet& val) const = 0;
  virtual const std::vector<double>& ledger() const = 0;

  /// Rows drawn from the learner's own generative model, when it has one.
  virtual std::optional<Dataset> simulate(const Intervention&, std::size_t, Rng&) const { return std::nullopt; }

  virtual std::size_t buffer_rows() const = 0;

  bool ledger_initialized() const;
  double total_loss() const;
};

struct LearnerConfig {
  std::size_t hidden = 64;
  double lr = 2e-3;
  double dropout = 0.1;
  std::size_t steps_per_episode = 20;
  std::size_t batch_size = 32;
  std::size_t window = 2048;
  /// false: roots become zero-input predictors trained on every row.
  bool root_learner = true;
  AdamConfig adam;
};

/// Append-only row store shared copy-on-write between a learner and its clones.
struct ReplayBuffer {
  std::size_t width = 0;
  std::vector<double> values;  // row-major
  std::vector<std::ptrdiff_t> intervened;  // -1 when observational

  std::size_t rows() const { return intervened.size(); }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * width, width}; }
};

/// Per-node neural predictors over parent values plus Gaussian root models.
class MechanismLearner final : public Learner {
 public:
  MechanismLearner(std::shared_ptr<const CausalGraph> graph, const LearnerConfig& cfg, Rng& rng);

  const CausalGraph& graph() const { return *graph_; }
  const LearnerConfig& config() const { return cfg_; }
  void set_dropout(double p) { cfg_.dropout = p; }

  /// True when the node is modelled as a Gaussian (root learner enabled).
  bool has_root_model(std::size_t node) const;

  /// Throws Error{RootHasNoPredictor}.
  double predict(std::size_t node, std::span<const double> parent_values, bool stochastic = false,
                 Rng* rng = nullptr) const;

  /// One Adam step for `node` on the batch; rows intervened on `node` are
  /// excluded. Returns the pre-update loss (0 and no step if nothing is left).
  /// Throws Error{EmptyBatch}.
  double train_step(std::size_t node, const Dataset& batch, double lr);

  /// Mean loss and gradient w.r.t. node_params(node) over the eligible rows.
  double loss_and_gradient(std::size_t node, const Dataset& batch, std::vector<double>& grad) const;

  /// Flat parameters: network layout for predictors, (mu, log_sigma) for roots.
  std::span<double> node_params(std::size_t node);
  std::span<const double> node_params(std::size_t node) const;
  const TwoLayerNet& network(std::size_t node) const;
  const Adam& optimizer(std::size_t node) const;

  double root_mean(std::size_t node) const;
  double root_std(std::size_t node) const;

  /// Sample variance of T dropout forward passes. Throws Error{RootHasNoPredictor, InvalidArgument}.
  double mc_dropout_variance(std::size_t node, std::span<const double> parent_values, std::size_t passes,
                             Rng& rng) const;

  /// Deterministic forward propagation of the learned model under do(node=value):
  /// roots at their means, children at predictor outputs.
  std::vector<double> mean_state(const std::optional<Intervention>& intervention) const;

  std::unique_ptr<Learner> clone() const override;
  std::size_t ledger_size() const override { return graph_->size(); }
  void observe(const Dataset& data) override;
  void fit_episode(Rng& rng) override;
  void fit_probe(const Dataset& probe, std::size_t steps, double lr, std::size_t replay, Rng& rng) override;
  const std::vector<double>& evaluate(const ValidationSet& val) override;
  std::vector<double> validation_losses(const ValidationSet& val) const override;
  const std::vector<double>& ledger() const override { return ledger_; }
  std::optional<Dataset> simulate(const Intervention& iv, std::size_t n, Rng& rng) const override;
  std::size_t buffer_rows() const override { return buffer_->rows(); }
  const ReplayBuffer& buffer() const { return *buffer_; }

  /// Serial reference for validation_losses (the default path splits nodes across OpenMP threads).
  std::vector<double> validation_losses_serial(const ValidationSet& val) const;

  /// Tensor-map checkpoint: {"format","version","graph":[names],"config":{..},
  /// "tensors":{"<node>.w1": {"shape":[h,in],"data":[..]}, ".b1", ".w2", ".b2" or ".root",
  /// ".adam_m", ".adam_v"},
  /// "adam_steps":{"<node>": t}, "ledger":[..]}.
  nlohmann::json to_json() const;
  static MechanismLearner from_json(const nlohmann::json& j, std::shared_ptr<const CausalGraph> graph);

  friend bool operator==(const MechanismLearner& a, const MechanismLearner& b);

 private:
  struct NodeModel {
    bool root = false;
    TwoLayerNet net;
    std::vector<double> root_params;  // mu, log_sigma
    Adam adam;
  };

  MechanismLearner() = default;

  // Rows of `batch` usable for `node`, as (row-major values, count).
  double node_loss(std::size_t node, const std::vector<const double*>& rows, std::vector<double>* grad) const;
  void step_node(std::size_t node, const std::vector<const double*>& rows, double lr);
  double node_validation_loss(std::size_t node, const ValidationSet& val) const;

  std::shared_ptr<const CausalGraph> graph_;
  LearnerConfig cfg_;
  std::vector<NodeModel> models_;
  std::shared_ptr<const ReplayBuffer> buffer_;
  std::vector<double> ledger_;
};

/// Root log-likelihood (mean Gaussian NLL) for (mu, log_sigma) over values.
double gaussian_nll(double mu, double log_sigma, std::span<const double> values);

}  // namespace intervene

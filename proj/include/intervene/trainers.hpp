#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "intervene/nn.hpp"
#include "intervene/policy.hpp"

namespace intervene {

struct PreferencePair {
  std::vector<double> features;
  Candidate winner;
  Candidate loser;
};

enum class PairMode { BestWorst, All };

struct DpoConfig {
  double beta = 0.1;
  double lr = 1e-5;
  std::size_t refresh_period = 25;
  PairMode pairs_per_step = PairMode::BestWorst;
};

struct PpoConfig {
  double lambda = 0.95;
  double gamma = 0.99;
  double clip = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  std::size_t epochs = 4;
  std::size_t rollout = 10;  // episodes per update
  double lr = 3e-4;
};

/// (argmax, argmin) reward indices; nullopt when max - min < 1e-9.
/// Throws Error{UnscoredCandidate, InvalidArgument (K < 2)}.
std::optional<std::pair<std::size_t, std::size_t>> preference_indices(const std::vector<Candidate>& candidates);

std::optional<PreferencePair> make_preference_pair(const std::vector<Candidate>& candidates,
                                                   const std::vector<double>& features);

/// BestWorst: at most one pair. All: every ordered pair whose reward gap is at least 1e-9.
std::vector<PreferencePair> make_preference_pairs(const std::vector<Candidate>& candidates,
                                                  const std::vector<double>& features, PairMode mode);

/// -log sigmoid(beta * ((pw - rw) - (pl - rl))) over policy/reference log-probs.
double dpo_loss_from_logps(double policy_w, double ref_w, double policy_l, double ref_l, double beta);

/// Loss for one pair; accumulates scale * dloss/dparams into grad when non-empty.
double dpo_loss(const TrainablePolicy& policy, const TrainablePolicy& reference, const PreferencePair& pair,
                double beta, std::span<double> grad = {}, double scale = 1.0);

/// Implicit margin beta * (winner log-ratio - loser log-ratio).
double dpo_margin(const TrainablePolicy& policy, const TrainablePolicy& reference, const PreferencePair& pair,
                  double beta);

struct DpoStats {
  double loss = 0.0;    // mean over the batch, before the step
  double margin = 0.0;  // mean implicit margin, before the step
  std::size_t pairs = 0;
};

/// One Adam step on the mean pair loss. Empty batch: no-op.
DpoStats dpo_update(TrainablePolicy& policy, const TrainablePolicy& reference, const std::vector<PreferencePair>& pairs,
                    const DpoConfig& cfg);

/// At episodes that are multiples of `period` the reference becomes a copy of
/// the policy. Returns whether it did. Throws Error{InvalidArgument} for period 0.
bool refresh_reference(const TrainablePolicy& policy, TrainablePolicy& reference, std::size_t episode,
                       std::size_t period);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// delta_t = r_t + gamma V_{t+1} - V_t with V_T = bootstrap;
/// A_t = delta_t + gamma lambda A_{t+1}; returns = A + V.
/// Throws Error{LengthMismatch}.
GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values, double bootstrap,
                      double lambda, double gamma);

/// State-value network over StateFeatures.
class Critic {
 public:
  Critic() = default;
  Critic(std::size_t n_features, std::size_t hidden, Rng& rng);

  double value(std::span<const double> features) const;
  /// Mean squared error to the targets, accumulating its gradient.
  double loss(const std::vector<std::vector<double>>& features, const std::vector<double>& targets,
              std::span<double> grad) const;
  void apply_gradient(std::span<const double> grad, double lr) { adam_.step(net_.params(), grad, lr); }
  std::span<const double> params() const { return net_.params(); }
  std::span<double> params() { return net_.params(); }
  std::size_t param_count() const { return net_.param_count(); }

  friend bool operator==(const Critic&, const Critic&) = default;

 private:
  TwoLayerNet net_;
  Adam adam_;
};

struct Transition {
  std::vector<double> features;
  Intervention action;
  double old_log_prob = 0.0;
  double reward = 0.0;
};

struct PpoSample {
  std::vector<double> features;
  Intervention action;
  double old_log_prob = 0.0;
  double advantage = 0.0;
};

/// -mean(min(r A, clip(r, 1-eps, 1+eps) A)) with r = exp(logp - old_logp);
/// accumulates its gradient into grad when non-empty.
double ppo_surrogate_loss(const TrainablePolicy& policy, const std::vector<PpoSample>& batch, double clip,
                          std::span<double> grad = {});

/// Unclipped counterpart -mean(r A).
double ppo_unclipped_loss(const TrainablePolicy& policy, const std::vector<PpoSample>& batch);

/// Surrogate - entropy_coef * mean entropy; accumulates gradient.
double ppo_policy_loss(const TrainablePolicy& policy, const std::vector<PpoSample>& batch, const PpoConfig& cfg,
                       std::span<double> grad = {});

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double mean_advantage = 0.0;
};

/// GAE over the rollout (bootstrap from the critic at `next_features`), then
/// cfg.epochs full-batch Adam steps on policy and critic.
PpoStats ppo_update(TrainablePolicy& policy, Critic& critic, const std::vector<Transition>& rollout,
                    const std::vector<double>& next_features, const PpoConfig& cfg);

}  // namespace intervene

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "intervene/environment.hpp"
#include "intervene/learner.hpp"
#include "intervene/policy.hpp"
#include "intervene/stats.hpp"
#include "intervene/trainers.hpp"

namespace intervene {

enum class PolicyKind { Random, RoundRobin, MaxVariance, Ppo, Dpo, RandomLookahead };

/// Accepts random, roundrobin, maxvar, ppo, dpo, random-lookahead.
/// Throws Error{UnknownPolicy}.
PolicyKind parse_policy(const std::string& name);
std::string to_string(PolicyKind kind);

enum class ProbeMode { Oracle, Self };
enum class SelectBy { Reward, Gain };

struct ProbeConfig {
  std::size_t rows = 16;
  std::size_t steps = 5;
  double lr = 1e-4;
  std::size_t replay = 0;
  ProbeMode mode = ProbeMode::Oracle;
};

struct ConvergenceConfig {
  double threshold = 0.1;
  std::vector<double> thresholds;  // per ledger entry; empty: `threshold` everywhere
  std::size_t window = 10;
  std::size_t min_episodes = 40;
  std::size_t max_episodes = 300;

  double tau(std::size_t i) const { return thresholds.empty() ? threshold : thresholds.at(i); }
};

struct Ablations {
  bool no_pernode_convergence = false;  // fixed 100 episodes
  bool no_root_learner = false;
  bool no_dpo = false;  // frozen policy
  bool no_diversity = false;  // gamma = 0

  friend bool operator==(const Ablations&, const Ablations&) = default;
};

struct OrchestratorConfig {
  std::size_t candidates = 4;
  double temperature = 0.7;
  double alpha = 0.1;
  double gamma = 0.05;
  ProbeConfig probe;
  ConvergenceConfig convergence;
  SelectBy select_by = SelectBy::Gain;
  /// When set, run exactly this many episodes and ignore convergence.
  std::optional<std::size_t> fixed_episodes;
  std::size_t ablation_episodes = 100;
  std::size_t warm_start = 200;
  std::size_t bc_epochs = 20;
  double bc_lr = 1e-2;
  std::size_t policy_hidden = 64;
  std::size_t maxvar_passes = 20;
};

/// Everything one run needs besides the seed.
struct ExperimentSpec {
  EnvironmentOptions env;
  PolicyKind policy = PolicyKind::Dpo;
  LearnerConfig learner;
  DpoConfig dpo;
  PpoConfig ppo;
  OrchestratorConfig orchestrator;
  Ablations ablations;
};

/// Ledger totals before minus after training a clone on probe rows for the
/// candidate. The learner itself is not modified. Throws
/// Error{LedgerUninitialized, ProbeModeUnavailable}.
double estimate_info_gain(const Learner& learner, const Environment& env, const ValidationSet& val,
                          const Intervention& iv, const ProbeConfig& probe, Rng& rng);

/// L_node / sum L; 0 when the sum is 0.
double node_importance(std::size_t node, const std::vector<double>& ledger);

/// 0.5 (1 - n_node / max(1, N)) + 0.5 novelty, novelty = 1 / (1 + bin count).
double diversity(std::size_t node, double value, const History& history);

/// Full breakdown for one candidate.
RewardBreakdown score(const Candidate& candidate, const Learner& learner, const Environment& env,
                      const ValidationSet& val, const History& history, const OrchestratorConfig& cfg, Rng& rng);

/// Scores every candidate; candidate k draws its probe from stream (episode_seed, 100 + k),
/// so the result does not depend on thread count. Parallel over candidates.
void score_candidates(std::vector<Candidate>& candidates, const Learner& learner, const Environment& env,
                      const ValidationSet& val, const History& history, const OrchestratorConfig& cfg,
                      std::uint64_t episode_seed);
void score_candidates_serial(std::vector<Candidate>& candidates, const Learner& learner, const Environment& env,
                             const ValidationSet& val, const History& history, const OrchestratorConfig& cfg,
                             std::uint64_t episode_seed);

/// Index of the executed candidate: max total (or max info gain), first on ties.
std::size_t select_candidate(const std::vector<Candidate>& candidates, SelectBy by);

/// true iff history.size() >= min_episodes and each of the last `window`
/// ledgers has every L_i < tau_i.
bool check_convergence(const std::vector<std::vector<double>>& ledger_history, const ConvergenceConfig& cfg);

struct WarmStartResult {
  std::size_t interventions = 0;
  std::size_t labels = 0;
  double bc_initial_nll = 0.0;
  double bc_final_nll = 0.0;
};

/// Executes n random interventions (the first of each random K-set) and trains
/// the learner on them; when a policy is given, fits it by behaviour cloning
/// the best-scoring candidate of each K-set. n = 0 is a no-op.
WarmStartResult warm_start(TrainablePolicy* policy, const Environment& env, Learner& learner, const ValidationSet& val,
                           std::size_t n, const OrchestratorConfig& cfg, std::uint64_t seed);

struct EpisodeLog {
  std::size_t episode = 0;
  std::vector<Candidate> candidates;
  std::size_t executed = 0;
  std::vector<double> ledger;
  std::map<std::string, double> training;
};

struct RunResult {
  std::string environment;
  std::string policy;
  std::uint64_t seed = 0;
  std::size_t episodes = 0;
  std::optional<std::size_t> convergence_episode;
  std::vector<double> final_ledger;
  double final_total = 0.0;
  std::vector<std::string> action_names;
  std::vector<std::size_t> histogram;
  std::size_t executed_interventions = 0;
  std::size_t probe_rows = 0;
  std::size_t warm_start_interventions = 0;
  std::map<std::string, double> metrics;
  std::vector<EpisodeLog> logs;
  /// Trainable policies only: after warm start, and at the end of the run.
  std::optional<TrainablePolicy> warm_policy;
  std::optional<TrainablePolicy> final_policy;
};

/// One full run: fresh learner, warm start for trainable policies, episodes
/// until convergence, the cap, or the fixed budget.
RunResult run_single(const ExperimentSpec& spec, std::uint64_t seed);

struct SummaryStats {
  double mean = 0.0;
  double std = 0.0;
  double median = 0.0;
  ConfidenceInterval ci;
};

SummaryStats summarize(const std::vector<double>& values);

struct ExperimentResult {
  std::vector<RunResult> runs;  // seed order
  SummaryStats final_total;
  std::map<std::string, SummaryStats> metrics;
  std::vector<double> mean_histogram;
};

inline const std::vector<std::uint64_t>& default_seeds() {
  static const std::vector<std::uint64_t> seeds{42, 123, 456, 789, 1011};
  return seeds;
}

/// Seeds run in parallel on up to `jobs` threads; results are merged in seed order.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::vector<std::uint64_t>& seeds,
                                std::size_t jobs = 1);

nlohmann::json to_json(const RewardBreakdown& r);
nlohmann::json to_json(const EpisodeLog& log, const std::vector<std::string>& action_names);
/// Summary without episode logs.
nlohmann::json to_json(const RunResult& r);
nlohmann::json to_json(const SummaryStats& s);
nlohmann::json to_json(const ExperimentResult& e);

}  // namespace intervene

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "intervene/archive.hpp"
#include "intervene/dataset.hpp"
#include "intervene/duffing.hpp"
#include "intervene/learner.hpp"
#include "intervene/scm.hpp"

namespace intervene {

/// What the experiment loop talks to: an action space of nodes (or regimes),
/// an oracle that answers actions with data, a frozen validation set, and a
/// matching learner.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual std::vector<std::string> action_names() const = 0;
  std::size_t action_count() const { return action_names().size(); }
  virtual std::vector<std::string> ledger_names() const = 0;
  virtual Interval value_range() const = 0;
  /// false when actions carry no continuous value (regime selection).
  virtual bool has_value() const { return true; }
  virtual std::size_t default_rows() const = 0;

  virtual Dataset execute(const Intervention& action, std::size_t n, Rng& rng) const = 0;
  virtual ValidationSet make_validation(std::uint64_t seed) const = 0;
  virtual std::unique_ptr<Learner> make_learner(const LearnerConfig& cfg, Rng& rng) const = 0;

  /// Ledger entry whose share defines the importance term for an action.
  virtual std::optional<std::size_t> ledger_index(std::size_t action) const { return action; }

  /// Environment-specific end-of-run metrics.
  virtual std::map<std::string, double> summary_metrics(const Learner&, const std::vector<std::size_t>&) const {
    return {};
  }
};

struct EnvironmentOptions {
  std::string name = "scm5";  // scm5 | scm15 | scm-file | duffing | archive
  std::string scm_path;
  Interval range{-5.0, 5.0};
  std::size_t rows_per_execution = 32;
  DuffingParams duffing;
  std::size_t duffing_rows = 200;
  std::string archive_csv;  // empty: synthetic archive
  std::vector<RegimeSpec> archive_regimes;
  std::size_t synthetic_rows = 480;
  std::size_t synthetic_regimes = 4;
  std::uint64_t synthetic_seed = 7;
  std::size_t holdout_every = 5;
};

class ScmEnvironment final : public Environment {
 public:
  ScmEnvironment(std::string name, OracleScm scm, std::size_t rows);

  const OracleScm& scm() const { return scm_; }
  std::shared_ptr<const CausalGraph> graph() const { return graph_; }

  std::string name() const override { return name_; }
  std::vector<std::string> action_names() const override { return scm_.graph().names(); }
  std::vector<std::string> ledger_names() const override { return scm_.graph().names(); }
  Interval value_range() const override { return scm_.range(); }
  std::size_t default_rows() const override { return rows_; }
  Dataset execute(const Intervention& action, std::size_t n, Rng& rng) const override;
  /// 200 observational rows, then 40 rows under do(p = u), u in {-4,-2,0,2,4},
  /// for every node p that is a parent of some non-root node.
  ValidationSet make_validation(std::uint64_t seed) const override;
  std::unique_ptr<Learner> make_learner(const LearnerConfig& cfg, Rng& rng) const override;
  /// collider_parent_fraction: share of executed actions on parents of nodes with >= 2 parents.
  std::map<std::string, double> summary_metrics(const Learner&, const std::vector<std::size_t>& histogram) const override;

 private:
  std::string name_;
  OracleScm scm_;
  std::shared_ptr<const CausalGraph> graph_;
  std::size_t rows_;
};

class DuffingEnvironment final : public Environment {
 public:
  DuffingEnvironment(DuffingParams params, Interval range, std::size_t rows);

  const DuffingParams& params() const { return params_; }

  std::string name() const override { return "duffing"; }
  std::vector<std::string> action_names() const override;
  std::vector<std::string> ledger_names() const override { return action_names(); }
  Interval value_range() const override { return range_; }
  std::size_t default_rows() const override { return rows_; }
  /// Clamp oscillator `node` at `value` and record a trajectory.
  Dataset execute(const Intervention& action, std::size_t n, Rng& rng) const override;
  /// Two free trajectories plus one per oscillator clamped at each of {-2, 0, 2}.
  ValidationSet make_validation(std::uint64_t seed) const override;
  std::unique_ptr<Learner> make_learner(const LearnerConfig& cfg, Rng& rng) const override;
  /// coupling_estimate, coupling_error, middle_clamp_fraction.
  std::map<std::string, double> summary_metrics(const Learner&, const std::vector<std::size_t>& histogram) const override;

 private:
  DuffingParams params_;
  Interval range_;
  std::size_t rows_;
};

class ArchiveEnvironment final : public Environment {
 public:
  ArchiveEnvironment(const Archive& archive, std::size_t holdout_every, std::size_t rows);

  const Archive& training() const { return train_; }
  const Archive& holdout() const { return holdout_; }
  std::shared_ptr<const CausalGraph> graph() const { return graph_; }

  std::string name() const override { return "archive"; }
  std::vector<std::string> action_names() const override;
  std::vector<std::string> ledger_names() const override { return graph_->names(); }
  Interval value_range() const override { return {0.0, 0.0}; }
  bool has_value() const override { return false; }
  std::size_t default_rows() const override { return rows_; }
  Dataset execute(const Intervention& action, std::size_t n, Rng& rng) const override;
  ValidationSet make_validation(std::uint64_t seed) const override;
  std::unique_ptr<Learner> make_learner(const LearnerConfig& cfg, Rng& rng) const override;
  std::optional<std::size_t> ledger_index(std::size_t) const override { return std::nullopt; }
  /// high_volatility_fraction: share of picks on regimes whose target variance exceeds the median.
  std::map<std::string, double> summary_metrics(const Learner&, const std::vector<std::size_t>& histogram) const override;

 private:
  Archive train_;
  Archive holdout_;
  std::shared_ptr<const CausalGraph> graph_;
  std::size_t rows_;
  std::vector<bool> high_volatility_;
};

/// Throws Error{UnknownEnvironment}.
std::unique_ptr<Environment> make_environment(const EnvironmentOptions& opts);

}  // namespace intervene

#include "intervene/environment.hpp"

#include <algorithm>

#include "intervene/error.hpp"

namespace intervene {

// --- SCM ---------------------------------------------------------------------

ScmEnvironment::ScmEnvironment(std::string name, OracleScm scm, std::size_t rows)
    : name_(std::move(name)),
      scm_(std::move(scm)),
      graph_(std::make_shared<const CausalGraph>(scm_.graph())),
      rows_(rows) {}

Dataset ScmEnvironment::execute(const Intervention& action, std::size_t n, Rng& rng) const {
  return sample(scm_, action, n, rng);
}

ValidationSet ScmEnvironment::make_validation(std::uint64_t seed) const {
  Rng rng(seed);
  ValidationSet val;
  val.parts.push_back(sample(scm_, std::nullopt, 200, rng));
  const auto& g = scm_.graph();
  std::vector<bool> is_parent(g.size(), false);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t p : g.parents(i)) is_parent[p] = true;
  }
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (!is_parent[p]) continue;
    for (double u : {-4.0, -2.0, 0.0, 2.0, 4.0}) val.parts.push_back(sample(scm_, Intervention{p, u}, 40, rng));
  }
  return val;
}

std::unique_ptr<Learner> ScmEnvironment::make_learner(const LearnerConfig& cfg, Rng& rng) const {
  return std::make_unique<MechanismLearner>(graph_, cfg, rng);
}

std::map<std::string, double> ScmEnvironment::summary_metrics(const Learner&,
                                                              const std::vector<std::size_t>& histogram) const {
  const auto& g = scm_.graph();
  std::vector<bool> collider_parent(g.size(), false);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g.parents(i).size() >= 2) {
      for (std::size_t p : g.parents(i)) collider_parent[p] = true;
    }
  }
  std::size_t total = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < histogram.size(); ++i) {
    total += histogram[i];
    if (collider_parent[i]) hits += histogram[i];
  }
  return {{"collider_parent_fraction", total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0}};
}

// --- Duffing -----------------------------------------------------------------

DuffingEnvironment::DuffingEnvironment(DuffingParams params, Interval range, std::size_t rows)
    : params_(std::move(params)), range_(range), rows_(rows) {
  params_.validate();
}

std::vector<std::string> DuffingEnvironment::action_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < params_.n_osc; ++i) names.push_back("X" + std::to_string(i + 1));
  return names;
}

Dataset DuffingEnvironment::execute(const Intervention& action, std::size_t n, Rng& rng) const {
  if (!range_.contains(action.value)) throw Error(Errc::ValueOutOfRange, "clamp value " + format_double(action.value));
  return sample_trajectory(params_, Clamp{action.node, action.value}, n * params_.stride, params_.stride, rng);
}

ValidationSet DuffingEnvironment::make_validation(std::uint64_t seed) const {
  Rng rng(seed);
  ValidationSet val;
  const std::size_t horizon = rows_ * params_.stride;
  for (int k = 0; k < 2; ++k) val.parts.push_back(sample_trajectory(params_, std::nullopt, horizon, params_.stride, rng));
  for (std::size_t i = 0; i < params_.n_osc; ++i) {
    for (double u : {-2.0, 0.0, 2.0}) {
      val.parts.push_back(sample_trajectory(params_, Clamp{i, u}, horizon, params_.stride, rng));
    }
  }
  return val;
}

std::unique_ptr<Learner> DuffingEnvironment::make_learner(const LearnerConfig&, Rng&) const {
  return std::make_unique<CouplingLearner>(params_);
}

std::map<std::string, double> DuffingEnvironment::summary_metrics(const Learner& learner,
                                                                  const std::vector<std::size_t>& histogram) const {
  std::map<std::string, double> out;
  if (const auto* cl = dynamic_cast<const CouplingLearner*>(&learner)) {
    out["coupling_estimate"] = cl->coupling_estimate();
    out["coupling_error"] = coupling_error(cl->coupling_estimate(), params_.k);
  }
  std::size_t total = 0;
  for (auto h : histogram) total += h;
  const std::size_t middle = params_.n_osc / 2;
  out["middle_clamp_fraction"] = total ? static_cast<double>(histogram.at(middle)) / static_cast<double>(total) : 0.0;
  return out;
}

// --- Archive -----------------------------------------------------------------

ArchiveEnvironment::ArchiveEnvironment(const Archive& archive, std::size_t holdout_every, std::size_t rows)
    : rows_(rows) {
  std::tie(train_, holdout_) = split_holdout(archive, holdout_every);
  auto names = archive.column_names();
  std::vector<Edge> edges;
  for (std::size_t f = 0; f < archive.feature_names.size(); ++f) edges.emplace_back(f, archive.feature_names.size());
  graph_ = std::make_shared<const CausalGraph>(CausalGraph::create(names, edges));
  const auto var = regime_target_variance(archive);
  auto sorted = var;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted.size() % 2 ? sorted[sorted.size() / 2]
                                          : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
  for (double v : var) high_volatility_.push_back(v > median);
}

std::vector<std::string> ArchiveEnvironment::action_names() const {
  std::vector<std::string> out;
  for (const auto& r : train_.regimes) out.push_back(r.spec.label);
  return out;
}

Dataset ArchiveEnvironment::execute(const Intervention& action, std::size_t n, Rng& rng) const {
  return query(train_, {action.node, n}, rng);
}

ValidationSet ArchiveEnvironment::make_validation(std::uint64_t) const {
  Dataset d(holdout_.rows(), holdout_.features.size() + 1);
  for (std::size_t r = 0; r < holdout_.rows(); ++r) {
    const auto row = holdout_.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) d.at(r, c) = row[c];
  }
  return {{std::move(d)}};
}

std::unique_ptr<Learner> ArchiveEnvironment::make_learner(const LearnerConfig& cfg, Rng& rng) const {
  return std::make_unique<MechanismLearner>(graph_, cfg, rng);
}

std::map<std::string, double> ArchiveEnvironment::summary_metrics(const Learner&,
                                                                  const std::vector<std::size_t>& histogram) const {
  std::size_t total = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < histogram.size(); ++i) {
    total += histogram[i];
    if (high_volatility_[i]) hits += histogram[i];
  }
  return {{"high_volatility_fraction", total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0}};
}

std::unique_ptr<Environment> make_environment(const EnvironmentOptions& opts) {
  auto with_range = [&](const OracleScm& s) {
    return OracleScm(s.graph(), s.mechanisms(), opts.range);
  };
  if (opts.name == "scm5") {
    return std::make_unique<ScmEnvironment>("scm5", with_range(build_benchmark_5node()), opts.rows_per_execution);
  }
  if (opts.name == "scm15") {
    return std::make_unique<ScmEnvironment>("scm15", with_range(build_benchmark_15node()), opts.rows_per_execution);
  }
  if (opts.name == "scm-file") {
    if (opts.scm_path.empty()) throw Error(Errc::ConfigError, "scm-file environment needs env.scm_path");
    return std::make_unique<ScmEnvironment>("scm-file", load_scm(opts.scm_path), opts.rows_per_execution);
  }
  if (opts.name == "duffing") {
    return std::make_unique<DuffingEnvironment>(opts.duffing, opts.range, opts.duffing_rows);
  }
  if (opts.name == "archive") {
    Archive a;
    if (opts.archive_csv.empty()) {
      Rng rng(opts.synthetic_seed);
      a = generate_synthetic_archive(opts.synthetic_rows, opts.synthetic_regimes, rng);
    } else {
      a = load_archive(opts.archive_csv, opts.archive_regimes);
    }
    return std::make_unique<ArchiveEnvironment>(a, opts.holdout_every, opts.rows_per_execution);
  }
  throw Error(Errc::UnknownEnvironment, "'" + opts.name + "' (expected scm5, scm15, scm-file, duffing, archive)");
}

}  // namespace intervene

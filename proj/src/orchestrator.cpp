#include "intervene/orchestrator.hpp"

#include <cmath>
#include <exception>
#include <numeric>

#include "intervene/error.hpp"

namespace intervene {

PolicyKind parse_policy(const std::string& name) {
  if (name == "random") return PolicyKind::Random;
  if (name == "roundrobin") return PolicyKind::RoundRobin;
  if (name == "maxvar") return PolicyKind::MaxVariance;
  if (name == "ppo") return PolicyKind::Ppo;
  if (name == "dpo") return PolicyKind::Dpo;
  if (name == "random-lookahead") return PolicyKind::RandomLookahead;
  throw Error(Errc::UnknownPolicy, "'" + name + "' (expected random, roundrobin, maxvar, ppo, dpo, random-lookahead)");
}

std::string to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::Random: return "random";
    case PolicyKind::RoundRobin: return "roundrobin";
    case PolicyKind::MaxVariance: return "maxvar";
    case PolicyKind::Ppo: return "ppo";
    case PolicyKind::Dpo: return "dpo";
    case PolicyKind::RandomLookahead: return "random-lookahead";
  }
  return "unknown";
}

double estimate_info_gain(const Learner& learner, const Environment& env, const ValidationSet& val,
                          const Intervention& iv, const ProbeConfig& probe, Rng& rng) {
  if (!learner.ledger_initialized()) throw Error(Errc::LedgerUninitialized, "evaluate the learner before scoring");
  Dataset rows;
  if (probe.mode == ProbeMode::Oracle) {
    rows = env.execute(iv, probe.rows, rng);
  } else {
    auto sim = learner.simulate(iv, probe.rows, rng);
    if (!sim) throw Error(Errc::ProbeModeUnavailable, "learner for '" + env.name() + "' has no generative form");
    rows = std::move(*sim);
  }
  auto clone = learner.clone();
  clone->fit_probe(rows, probe.steps, probe.lr, probe.replay, rng);
  const auto after = clone->validation_losses(val);
  return learner.total_loss() - std::accumulate(after.begin(), after.end(), 0.0);
}

double node_importance(std::size_t node, const std::vector<double>& ledger) {
  const double total = std::accumulate(ledger.begin(), ledger.end(), 0.0);
  if (!(total > 0.0)) return 0.0;
  return ledger.at(node) / total;
}

double diversity(std::size_t node, double value, const History& history) {
  const double n_total = static_cast<double>(std::max<std::size_t>(1, history.total()));
  const double share = static_cast<double>(history.node_count(node)) / n_total;
  const std::size_t c = history.bin_count(node, history.grid().nearest(value));
  const double novelty = c == 0 ? 1.0 : 1.0 / (1.0 + static_cast<double>(c));
  return 0.5 * (1.0 - share) + 0.5 * novelty;
}

RewardBreakdown score(const Candidate& candidate, const Learner& learner, const Environment& env,
                      const ValidationSet& val, const History& history, const OrchestratorConfig& cfg, Rng& rng) {
  const double gain = estimate_info_gain(learner, env, val, candidate.iv, cfg.probe, rng);
  const auto idx = env.ledger_index(candidate.iv.node);
  const double w = idx ? node_importance(*idx, learner.ledger()) : 0.0;
  const double d = diversity(candidate.iv.node, candidate.iv.value, history);
  return RewardBreakdown::combine(gain, w, d, cfg.alpha, cfg.gamma);
}

void score_candidates(std::vector<Candidate>& candidates, const Learner& learner, const Environment& env,
                      const ValidationSet& val, const History& history, const OrchestratorConfig& cfg,
                      std::uint64_t episode_seed) {
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(candidates.size()); ++k) {
    try {
      Rng rng = make_stream(episode_seed, 100 + static_cast<std::uint64_t>(k));
      candidates[k].reward = score(candidates[k], learner, env, val, history, cfg, rng);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

void score_candidates_serial(std::vector<Candidate>& candidates, const Learner& learner, const Environment& env,
                             const ValidationSet& val, const History& history, const OrchestratorConfig& cfg,
                             std::uint64_t episode_seed) {
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    Rng rng = make_stream(episode_seed, 100 + k);
    candidates[k].reward = score(candidates[k], learner, env, val, history, cfg, rng);
  }
}

std::size_t select_candidate(const std::vector<Candidate>& candidates, SelectBy by) {
  if (candidates.empty()) throw Error(Errc::InvalidArgument, "no candidates");
  auto key = [by](const Candidate& c) {
    if (!c.reward) throw Error(Errc::UnscoredCandidate, "candidate has no reward");
    return by == SelectBy::Reward ? c.reward->total : c.reward->info_gain;
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (key(candidates[i]) > key(candidates[best])) best = i;
  }
  return best;
}

bool check_convergence(const std::vector<std::vector<double>>& ledger_history, const ConvergenceConfig& cfg) {
  if (cfg.window == 0) throw Error(Errc::InvalidArgument, "convergence window must be >= 1");
  if (ledger_history.size() < cfg.min_episodes || ledger_history.size() < cfg.window) return false;
  for (std::size_t e = ledger_history.size() - cfg.window; e < ledger_history.size(); ++e) {
    const auto& l = ledger_history[e];
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (!(l[i] < cfg.tau(i))) return false;
    }
  }
  return true;
}

namespace {

ValueGrid grid_for(const Environment& env) {
  return env.has_value() ? ValueGrid(env.value_range()) : ValueGrid(Interval{0.0, 0.0});
}

Interval proposal_range(const Environment& env) {
  return env.has_value() ? env.value_range() : Interval{0.0, 0.0};
}

}  // namespace

WarmStartResult warm_start(TrainablePolicy* policy, const Environment& env, Learner& learner, const ValidationSet& val,
                           std::size_t n, const OrchestratorConfig& cfg, std::uint64_t seed) {
  WarmStartResult res;
  if (n == 0) return res;
  const ValueGrid grid = grid_for(env);
  const std::size_t n_act = env.action_count();
  History history(n_act, grid);
  if (!learner.ledger_initialized()) learner.evaluate(val);
  std::vector<std::pair<std::vector<double>, Intervention>> labels;
  for (std::size_t t = 0; t < n; ++t) {
    const std::uint64_t e = derive_seed(seed, t);
    Rng prop = make_stream(e, 1);
    std::vector<Candidate> cands;
    for (std::size_t k = 0; k < std::max<std::size_t>(cfg.candidates, 1); ++k) {
      const std::size_t node = uniform_index(prop, n_act);
      const std::size_t bin = uniform_index(prop, grid.size());
      cands.push_back({{node, grid.center(bin)}, 0.0, std::nullopt});
    }
    std::optional<std::vector<double>> features;
    if (policy) {
      features = featurize(learner.ledger(), history, t, n);
      score_candidates(cands, learner, env, val, history, cfg, e);
      labels.emplace_back(*features, cands[select_candidate(cands, cfg.select_by)].iv);
    }
    Rng exec = make_stream(e, 2);
    learner.observe(env.execute(cands[0].iv, env.default_rows(), exec));
    Rng fit = make_stream(e, 3);
    learner.fit_episode(fit);
    learner.evaluate(val);
    history.record(cands[0].iv);
  }
  res.interventions = n;
  if (!policy || labels.empty()) return res;
  res.labels = labels.size();
  const double scale = 1.0 / static_cast<double>(labels.size());
  for (std::size_t epoch = 0; epoch < cfg.bc_epochs; ++epoch) {
    std::vector<double> grad(policy->param_count(), 0.0);
    double nll = 0.0;
    for (const auto& [f, iv] : labels) nll -= scale * policy->log_prob_grad(f, iv, grad, -scale);
    if (epoch == 0) res.bc_initial_nll = nll;
    policy->apply_gradient(grad, cfg.bc_lr);
  }
  for (const auto& [f, iv] : labels) res.bc_final_nll -= scale * policy->log_prob(f, iv);
  return res;
}

RunResult run_single(const ExperimentSpec& spec_in, std::uint64_t seed) {
  ExperimentSpec spec = spec_in;
  auto& oc = spec.orchestrator;
  if (spec.ablations.no_root_learner) spec.learner.root_learner = false;
  if (spec.ablations.no_diversity) oc.gamma = 0.0;
  if (spec.ablations.no_pernode_convergence) oc.fixed_episodes = oc.ablation_episodes;

  const auto env = make_environment(spec.env);
  const ValidationSet val = env->make_validation(derive_seed(seed, stream::kValidation));
  Rng init = make_stream(seed, stream::kLearnerInit);
  auto learner = env->make_learner(spec.learner, init);
  learner->evaluate(val);

  const ValueGrid grid = grid_for(*env);
  const Interval range = proposal_range(*env);
  const std::size_t n_act = env->action_count();
  const std::size_t n_features = learner->ledger_size() + 2 * n_act + 1;

  RunResult res;
  res.environment = env->name();
  res.policy = to_string(spec.policy);
  res.seed = seed;
  res.action_names = env->action_names();

  const bool trainable = spec.policy == PolicyKind::Dpo || spec.policy == PolicyKind::Ppo;
  std::optional<TrainablePolicy> policy;
  std::optional<TrainablePolicy> reference;
  std::optional<Critic> critic;
  if (trainable) {
    Rng prng = make_stream(seed, stream::kPolicyInit);
    policy.emplace(n_features, n_act, grid, oc.policy_hidden, prng);
    Rng wl = make_stream(seed, stream::kWarmStart, 0);
    auto warm_learner = env->make_learner(spec.learner, wl);
    const auto ws = warm_start(&*policy, *env, *warm_learner, val, oc.warm_start, oc,
                               derive_seed(seed, stream::kWarmStart, 1));
    res.warm_start_interventions = ws.interventions;
    policy->reset_optimizer();
    reference = *policy;
    res.warm_policy = *policy;
    if (spec.policy == PolicyKind::Ppo) critic.emplace(n_features, oc.policy_hidden, prng);
  }
  const MechanismLearner* mech = dynamic_cast<const MechanismLearner*>(learner.get());
  if (spec.policy == PolicyKind::MaxVariance && !mech) {
    throw Error(Errc::InvalidArgument, "maxvar needs a learner with dropout predictors; '" + env->name() + "' has none");
  }

  const std::size_t budget = oc.fixed_episodes.value_or(oc.convergence.max_episodes);
  History history(n_act, grid);
  std::vector<std::vector<double>> ledger_history;
  std::vector<Transition> rollout;
  const bool train = trainable && !spec.ablations.no_dpo;

  for (std::size_t t = 0; t < budget; ++t) {
    const std::uint64_t e = derive_seed(seed, stream::kEpisode, t);
    Rng prop = make_stream(e, 1);
    const auto features = featurize(learner->ledger(), history, t, budget);
    EpisodeLog log;
    log.episode = t;
    switch (spec.policy) {
      case PolicyKind::Random: log.candidates = propose_random(n_act, range, 1, prop); break;
      case PolicyKind::RandomLookahead: log.candidates = propose_random(n_act, range, oc.candidates, prop); break;
      case PolicyKind::RoundRobin: {
        auto c = propose_round_robin(t, n_act);
        if (!env->has_value()) c.iv.value = 0.0;
        log.candidates = {c};
        break;
      }
      case PolicyKind::MaxVariance:
        log.candidates = {propose_max_variance(*mech, integer_grid(range), oc.maxvar_passes, derive_seed(e, 4))};
        break;
      case PolicyKind::Dpo:
      case PolicyKind::Ppo: log.candidates = policy->propose(features, oc.candidates, oc.temperature, prop); break;
    }
    if (log.candidates.size() > 1) {
      score_candidates(log.candidates, *learner, *env, val, history, oc, e);
      res.probe_rows += log.candidates.size() * oc.probe.rows;
      log.executed = select_candidate(log.candidates, oc.select_by);
    }
    const Candidate& chosen = log.candidates[log.executed];

    Rng exec = make_stream(e, 2);
    learner->observe(env->execute(chosen.iv, env->default_rows(), exec));
    Rng fit = make_stream(e, 3);
    learner->fit_episode(fit);
    learner->evaluate(val);
    history.record(chosen.iv);
    ++res.executed_interventions;

    if (train && spec.policy == PolicyKind::Dpo) {
      const auto pairs = make_preference_pairs(log.candidates, features, spec.dpo.pairs_per_step);
      const auto st = dpo_update(*policy, *reference, pairs, spec.dpo);
      log.training["dpo_loss"] = st.loss;
      log.training["dpo_margin"] = st.margin;
      log.training["pairs"] = static_cast<double>(st.pairs);
      if (refresh_reference(*policy, *reference, t + 1, spec.dpo.refresh_period)) log.training["reference_refreshed"] = 1;
    }
    if (train && spec.policy == PolicyKind::Ppo) {
      rollout.push_back({features, chosen.iv, chosen.log_prob, chosen.reward->total});
      if (rollout.size() >= spec.ppo.rollout) {
        const auto next = featurize(learner->ledger(), history, t + 1, budget);
        const auto st = ppo_update(*policy, *critic, rollout, next, spec.ppo);
        log.training["policy_loss"] = st.policy_loss;
        log.training["value_loss"] = st.value_loss;
        log.training["entropy"] = st.entropy;
        log.training["mean_advantage"] = st.mean_advantage;
        rollout.clear();
      }
    }
    log.ledger = learner->ledger();
    ledger_history.push_back(log.ledger);
    res.logs.push_back(std::move(log));
    if (!oc.fixed_episodes && check_convergence(ledger_history, oc.convergence)) {
      res.convergence_episode = t + 1;
      break;
    }
  }

  res.episodes = res.logs.size();
  res.final_ledger = learner->ledger();
  res.final_total = learner->total_loss();
  res.histogram = history.node_counts();
  res.metrics = env->summary_metrics(*learner, res.histogram);
  if (policy) res.final_policy = *policy;
  return res;
}

SummaryStats summarize(const std::vector<double>& values) {
  SummaryStats s;
  if (values.empty()) return s;
  s.mean = mean(values);
  s.std = sample_std(values);
  s.median = median(values);
  s.ci = t_interval(values);
  return s;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
  ExperimentResult out;
  out.runs.resize(seeds.size());
  std::exception_ptr failure;
  const int threads = static_cast<int>(std::max<std::size_t>(1, jobs));
#pragma omp parallel for num_threads(threads) schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(seeds.size()); ++i) {
    try {
      out.runs[i] = run_single(spec, seeds[i]);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  if (out.runs.empty()) return out;

  std::vector<double> totals;
  std::map<std::string, std::vector<double>> metrics;
  out.mean_histogram.assign(out.runs.front().histogram.size(), 0.0);
  for (const auto& r : out.runs) {
    totals.push_back(r.final_total);
    for (const auto& [k, v] : r.metrics) metrics[k].push_back(v);
    for (std::size_t i = 0; i < r.histogram.size(); ++i) {
      out.mean_histogram[i] += static_cast<double>(r.histogram[i]) / static_cast<double>(out.runs.size());
    }
  }
  out.final_total = summarize(totals);
  for (const auto& [k, v] : metrics) out.metrics[k] = summarize(v);
  return out;
}

// --- JSON ---------------------------------------------------------------------

namespace {

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

nlohmann::json intervention_json(const Intervention& iv, const std::vector<std::string>& names) {
  return {{"node", iv.node}, {"name", names.at(iv.node)}, {"value", iv.value}};
}

}  // namespace

nlohmann::json to_json(const RewardBreakdown& r) {
  return {{"info_gain", r.info_gain}, {"importance", r.importance}, {"diversity", r.diversity}, {"total", r.total}};
}

nlohmann::json to_json(const EpisodeLog& log, const std::vector<std::string>& action_names) {
  nlohmann::json j;
  j["episode"] = log.episode;
  j["candidates"] = nlohmann::json::array();
  for (const auto& c : log.candidates) {
    auto cj = intervention_json(c.iv, action_names);
    cj["log_prob"] = number(c.log_prob);
    cj["reward"] = c.reward ? to_json(*c.reward) : nlohmann::json(nullptr);
    j["candidates"].push_back(std::move(cj));
  }
  j["executed"] = log.executed;
  j["intervention"] = intervention_json(log.candidates.at(log.executed).iv, action_names);
  j["ledger"] = nlohmann::json::array();
  for (double v : log.ledger) j["ledger"].push_back(number(v));
  j["training"] = nlohmann::json::object();
  for (const auto& [k, v] : log.training) j["training"][k] = number(v);
  return j;
}

nlohmann::json to_json(const RunResult& r) {
  nlohmann::json j;
  j["environment"] = r.environment;
  j["policy"] = r.policy;
  j["seed"] = r.seed;
  j["episodes"] = r.episodes;
  j["convergence_episode"] = r.convergence_episode ? nlohmann::json(*r.convergence_episode) : nlohmann::json(nullptr);
  j["final_ledger"] = nlohmann::json::array();
  for (double v : r.final_ledger) j["final_ledger"].push_back(number(v));
  j["final_total"] = number(r.final_total);
  j["actions"] = r.action_names;
  j["histogram"] = r.histogram;
  j["executed_interventions"] = r.executed_interventions;
  j["probe_rows"] = r.probe_rows;
  j["warm_start_interventions"] = r.warm_start_interventions;
  j["metrics"] = nlohmann::json::object();
  for (const auto& [k, v] : r.metrics) j["metrics"][k] = number(v);
  return j;
}

nlohmann::json to_json(const SummaryStats& s) {
  return {{"mean", number(s.mean)}, {"std", number(s.std)}, {"median", number(s.median)},
          {"ci_lo", number(s.ci.lo)}, {"ci_hi", number(s.ci.hi)}};
}

nlohmann::json to_json(const ExperimentResult& e) {
  nlohmann::json j;
  j["runs"] = nlohmann::json::array();
  for (const auto& r : e.runs) j["runs"].push_back(to_json(r));
  j["final_total"] = to_json(e.final_total);
  j["metrics"] = nlohmann::json::object();
  for (const auto& [k, v] : e.metrics) j["metrics"][k] = to_json(v);
  j["mean_histogram"] = e.mean_histogram;
  return j;
}

}  // namespace intervene

#include "intervene/config.hpp"

#include <fstream>
#include <set>

#include "intervene/error.hpp"

namespace intervene {

namespace {

using nlohmann::json;

// Reads keys out of one JSON object and rejects whatever is left over.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(Errc::ConfigError, path_ + ": expected an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw Error(Errc::ConfigError, path_ + "." + key + ": " + e.what());
    }
  }

  template <class F>
  void with(const std::string& key, F&& f) {
    seen_.insert(key);
    if (j_.contains(key)) f(j_.at(key), path_ + "." + key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw Error(Errc::ConfigError, "unknown key " + path_ + "." + k);
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string probe_mode_name(ProbeMode m) { return m == ProbeMode::Oracle ? "oracle" : "self"; }
std::string select_name(SelectBy s) { return s == SelectBy::Reward ? "reward" : "gain"; }
std::string pair_mode_name(PairMode m) { return m == PairMode::BestWorst ? "1" : "all"; }

}  // namespace

nlohmann::json to_json(const LearnerConfig& c) {
  return {{"hidden", c.hidden}, {"lr", c.lr}, {"dropout", c.dropout}, {"steps_per_episode", c.steps_per_episode},
          {"batch_size", c.batch_size}, {"window", c.window}, {"root_learner", c.root_learner},
          {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}}};
}

nlohmann::json to_json(const EnvironmentOptions& o) {
  json regimes = json::array();
  for (const auto& r : o.archive_regimes) regimes.push_back({{"start", r.start}, {"end", r.end}, {"label", r.label}});
  return {{"name", o.name}, {"scm_path", o.scm_path}, {"range", {o.range.lo, o.range.hi}},
          {"rows_per_execution", o.rows_per_execution}, {"duffing", duffing_to_json(o.duffing)},
          {"duffing_rows", o.duffing_rows}, {"archive_csv", o.archive_csv}, {"archive_regimes", regimes},
          {"synthetic_rows", o.synthetic_rows}, {"synthetic_regimes", o.synthetic_regimes},
          {"synthetic_seed", o.synthetic_seed}, {"holdout_every", o.holdout_every}};
}

nlohmann::json to_json(const RunConfig& c) {
  const auto& s = c.spec;
  const auto& oc = s.orchestrator;
  json j;
  j["run"] = {{"policy", to_string(s.policy)}, {"seeds", c.seeds}, {"output_dir", c.output_dir}, {"jobs", c.jobs}};
  j["env"] = to_json(s.env);
  j["learner"] = to_json(s.learner);
  j["dpo"] = {{"beta", s.dpo.beta}, {"lr", s.dpo.lr}, {"refresh_period", s.dpo.refresh_period},
              {"pairs_per_step", pair_mode_name(s.dpo.pairs_per_step)}};
  j["ppo"] = {{"lambda", s.ppo.lambda}, {"gamma", s.ppo.gamma}, {"clip", s.ppo.clip},
              {"entropy_coef", s.ppo.entropy_coef}, {"value_coef", s.ppo.value_coef}, {"epochs", s.ppo.epochs},
              {"rollout", s.ppo.rollout}, {"lr", s.ppo.lr}};
  j["orchestrator"] = {
      {"candidates", oc.candidates},
      {"temperature", oc.temperature},
      {"alpha", oc.alpha},
      {"gamma", oc.gamma},
      {"probe",
       {{"rows", oc.probe.rows},
        {"steps", oc.probe.steps},
        {"lr", oc.probe.lr},
        {"replay", oc.probe.replay},
        {"mode", probe_mode_name(oc.probe.mode)}}},
      {"convergence",
       {{"threshold", oc.convergence.threshold},
        {"thresholds", oc.convergence.thresholds},
        {"window", oc.convergence.window},
        {"min_episodes", oc.convergence.min_episodes},
        {"max_episodes", oc.convergence.max_episodes}}},
      {"select_by", select_name(oc.select_by)},
      {"fixed_episodes", oc.fixed_episodes ? json(*oc.fixed_episodes) : json(nullptr)},
      {"ablation_episodes", oc.ablation_episodes},
      {"warm_start", oc.warm_start},
      {"bc_epochs", oc.bc_epochs},
      {"bc_lr", oc.bc_lr},
      {"policy_hidden", oc.policy_hidden},
      {"maxvar_passes", oc.maxvar_passes}};
  j["ablations"] = {{"no_pernode_convergence", s.ablations.no_pernode_convergence},
                    {"no_root_learner", s.ablations.no_root_learner},
                    {"no_dpo", s.ablations.no_dpo},
                    {"no_diversity", s.ablations.no_diversity}};
  j["bench"] = {{"policies", c.bench_policies}, {"episodes", c.bench_episodes}};
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  auto& s = c.spec;
  auto& oc = s.orchestrator;
  Section root(j, "config");
  root.with("run", [&](const json& v, const std::string& p) {
    Section sec(v, p);
    std::string policy = to_string(s.policy);
    sec.get("policy", policy);
    s.policy = parse_policy(policy);
    sec.get("seeds", c.seeds);
    sec.get("output_dir", c.output_dir);
    sec.get("jobs", c.jobs);
    sec.finish();
  });
  root.with("env", [&](const json& v, const std::string& p) {
    Section sec(v, p);
    auto& o = s.env;
    sec.get("name", o.name);
    sec.get("scm_path", o.scm_path);
    sec.with("range", [&](const json& r, const std::string& rp) {
      if (!r.is_array() || r.size() != 2) throw Error(Errc::ConfigError, rp + ": expected [lo, hi]");
      o.range = {r[0].get<double>(), r[1].get<double>()};
      if (!(o.range.lo < o.range.hi)) throw Error(Errc::ConfigError, rp + ": lo must be below hi");
    });
    sec.get("rows_per_execution", o.rows_per_execution);
    sec.with("duffing", [&](const json& d, const std::string& dp) {
      try {
        o.duffing = duffing_from_json(d);
      } catch (const Error& e) {
        throw Error(Errc::ConfigError, dp + ": " + e.what());
      }
    });
    sec.get("duffing_rows", o.duffing_rows);
    sec.get("archive_csv", o.archive_csv);
    sec.with("archive_regimes", [&](const json& arr, const std::string& ap) {
      if (!arr.is_array()) throw Error(Errc::ConfigError, ap + ": expected an array");
      o.archive_regimes.clear();
      for (std::size_t i = 0; i < arr.size(); ++i) {
        Section r(arr[i], ap + "[" + std::to_string(i) + "]");
        RegimeSpec spec;
        r.get("start", spec.start);
        r.get("end", spec.end);
        r.get("label", spec.label);
        r.finish();
        o.archive_regimes.push_back(spec);
      }
    });
    sec.get("synthetic_rows", o.synthetic_rows);
    sec.get("synthetic_regimes", o.synthetic_regimes);
    sec.get("synthetic_seed", o.synthetic_seed);
    sec.get("holdout_every", o.holdout_every);
    sec.finish();
  });
  root.with("learner", [&](const json& v, const std::string& p) {
    Section sec(v, p);
    auto& l = s.learner;
    sec.get("hidden", l.hidden);
    sec.get("lr", l.lr);
    sec.get("dropout", l.dropout);
    sec.get("steps_per_episode", l.steps_per_episode);
    sec.get("batch_size", l.batch_size);
    sec.get("window", l.window);
    sec.get("root_learner", l.root_learner);
    sec.with("adam", [&](const json& a, const std::string& ap) {
      Section as(a, ap);
      as.get("beta1", l.adam.beta1);
      as.get("beta2", l.adam.beta2);
      as.get("eps", l.adam.eps);
      as.finish();
    });
    sec.finish();
  });
  root.with("dpo", [&](const json& v, const std::string& p) {
    Section sec(v, p);
    sec.get("beta", s.dpo.beta);
    sec.get("lr", s.dpo.lr);
    sec.get("refresh_period", s.dpo.refresh_period);
    sec.with("pairs_per_step", [&](const json& m, const std::string& mp) {
      const std::string name = m.is_number() ? std::to_string(m.get<long>()) : m.get<std::string>();
      if (name == "1") s.dpo.pairs_per_step = PairMode::BestWorst;
      else if (name == "all") s.dpo.pairs_per_step = PairMode::All;
      else throw Error(Errc::ConfigError, mp + ": expected 1 or \"all\"");
    });
    sec.finish();
  });
  root.with("ppo", [&](const json& v, const std::string& p) {
    Section sec(v, p);
    sec.get("lambda", s.ppo.lambda);
    sec.get("gamma", s.ppo.gamma);
    sec.get("clip", s.ppo.clip);
    sec.get("entropy_coef", s.ppo.entropy_coef);
    sec.get("value_coef", s.ppo.value_coef);
    sec.get("epochs", s.ppo.epochs);
    sec.get("rollout", s.ppo.rollout);
    sec.get("lr", s.ppo.lr);
    sec.finish();
  });
  root.with("orchestrator", [&](const json& v, const std::string& p) {
    Section sec(v, p);
    sec.get("candidates", oc.candidates);
    sec.get("temperature", oc.temperature);
    sec.get("alpha", oc.alpha);
    sec.get("gamma", oc.gamma);
    sec.with("probe", [&](const json& pj, const std::string& pp) {
      Section ps(pj, pp);
      ps.get("rows", oc.probe.rows);
      ps.get("steps", oc.probe.steps);
      ps.get("lr", oc.probe.lr);
      ps.get("replay", oc.probe.replay);
      std::string mode = probe_mode_name(oc.probe.mode);
      ps.get("mode", mode);
      if (mode == "oracle") oc.probe.mode = ProbeMode::Oracle;
      else if (mode == "self") oc.probe.mode = ProbeMode::Self;
      else throw Error(Errc::ConfigError, pp + ".mode: expected oracle or self");
      ps.finish();
    });
    sec.with("convergence", [&](const json& cj, const std::string& cp) {
      Section cs(cj, cp);
      auto& cc = oc.convergence;
      cs.get("threshold", cc.threshold);
      cs.get("thresholds", cc.thresholds);
      cs.get("window", cc.window);
      cs.get("min_episodes", cc.min_episodes);
      cs.get("max_episodes", cc.max_episodes);
      cs.finish();
      if (cc.window == 0 || cc.min_episodes > cc.max_episodes) {
        throw Error(Errc::ConfigError, cp + ": need window >= 1 and min_episodes <= max_episodes");
      }
    });
    std::string select = select_name(oc.select_by);
    sec.get("select_by", select);
    if (select == "reward") oc.select_by = SelectBy::Reward;
    else if (select == "gain") oc.select_by = SelectBy::Gain;
    else throw Error(Errc::ConfigError, p + ".select_by: expected reward or gain");
    sec.with("fixed_episodes", [&](const json& f, const std::string& fp) {
      if (f.is_null()) oc.fixed_episodes.reset();
      else if (f.is_number_unsigned()) oc.fixed_episodes = f.get<std::size_t>();
      else throw Error(Errc::ConfigError, fp + ": expected a count or null");
    });
    sec.get("ablation_episodes", oc.ablation_episodes);
    sec.get("warm_start", oc.warm_start);
    sec.get("bc_epochs", oc.bc_epochs);
    sec.get("bc_lr", oc.bc_lr);
    sec.get("policy_hidden", oc.policy_hidden);
    sec.get("maxvar_passes", oc.maxvar_passes);
    sec.finish();
  });
  root.with("ablations", [&](const json& v, const std::string& p) {
    Section sec(v, p);
    sec.get("no_pernode_convergence", s.ablations.no_pernode_convergence);
    sec.get("no_root_learner", s.ablations.no_root_learner);
    sec.get("no_dpo", s.ablations.no_dpo);
    sec.get("no_diversity", s.ablations.no_diversity);
    sec.finish();
  });
  root.with("bench", [&](const json& v, const std::string& p) {
    Section sec(v, p);
    sec.get("policies", c.bench_policies);
    for (const auto& name : c.bench_policies) parse_policy(name);
    sec.get("episodes", c.bench_episodes);
    sec.finish();
  });
  root.finish();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace intervene

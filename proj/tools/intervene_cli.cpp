// Command-line front end: run, bench, ablate, plotdata, selftest.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "intervene/config.hpp"
#include "intervene/error.hpp"
#include "intervene/orchestrator.hpp"
#include "intervene/selftest.hpp"
#include "intervene/stats.hpp"

namespace fs = std::filesystem;
using namespace intervene;

namespace {

struct Overrides {
  std::string config_file;
  std::string env;
  std::string policy;
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 1;
  std::string output;
  std::size_t episodes = 0;
  std::size_t max_episodes = 0;
  std::size_t warm_start = 0;
  std::string scm_path;
  std::string archive_csv;
  std::string select_by;
  std::string probe_mode;
  std::string pairs_per_step;
  bool no_pernode_convergence = false;
  bool no_root_learner = false;
  bool no_dpo = false;
  bool no_diversity = false;
  std::vector<std::string> policies;
};

void add_common(CLI::App& cmd, Overrides& o, bool with_policy) {
  cmd.add_option("--config", o.config_file, "JSON config file; flags override its values")->check(CLI::ExistingFile);
  cmd.add_option("--env", o.env, "Environment: scm5, scm15, scm-file, duffing, archive");
  if (with_policy) cmd.add_option("--policy", o.policy, "Policy: random, roundrobin, maxvar, ppo, dpo, random-lookahead");
  cmd.add_option("--seeds", o.seeds, "Seeds (default 42 123 456 789 1011)");
  cmd.add_option("--jobs", o.jobs, "Seeds run in parallel")->check(CLI::PositiveNumber);
  cmd.add_option("--output", o.output, "Output root (default $INTERVENE_OUTPUT_ROOT or ./runs)");
  cmd.add_option("--episodes", o.episodes, "Run exactly this many episodes");
  cmd.add_option("--max-episodes", o.max_episodes, "Episode cap for convergence runs");
  cmd.add_option("--warm-start", o.warm_start, "Warm-start interventions for trainable policies");
  cmd.add_option("--scm", o.scm_path, "SCM JSON file for --env scm-file");
  cmd.add_option("--archive-csv", o.archive_csv, "Archive CSV for --env archive (default: synthetic)");
  cmd.add_option("--select-by", o.select_by, "Executed candidate: reward or gain")->check(CLI::IsMember({"reward", "gain"}));
  cmd.add_option("--probe-mode", o.probe_mode, "Lookahead data: oracle or self")->check(CLI::IsMember({"oracle", "self"}));
  cmd.add_option("--pairs-per-step", o.pairs_per_step, "DPO pairs per step: 1 or all")->check(CLI::IsMember({"1", "all"}));
  cmd.add_flag("--no-pernode-convergence", o.no_pernode_convergence, "Fixed episode budget instead of convergence");
  cmd.add_flag("--no-root-learner", o.no_root_learner, "Roots as zero-input predictors");
  cmd.add_flag("--no-dpo", o.no_dpo, "Freeze the policy");
  cmd.add_flag("--no-diversity", o.no_diversity, "Diversity weight 0");
}

RunConfig resolve(const CLI::App& cmd, const Overrides& o) {
  RunConfig c = o.config_file.empty() ? RunConfig{} : load_run_config(o.config_file);
  auto given = [&](const char* flag) { return cmd.count(flag) > 0; };
  if (given("--env")) c.spec.env.name = o.env;
  if (cmd.get_option_no_throw("--policy") && given("--policy")) c.spec.policy = parse_policy(o.policy);
  if (given("--seeds")) c.seeds = o.seeds;
  if (given("--jobs")) c.jobs = o.jobs;
  if (given("--output")) c.output_dir = o.output;
  if (given("--episodes")) c.spec.orchestrator.fixed_episodes = o.episodes;
  if (given("--max-episodes")) c.spec.orchestrator.convergence.max_episodes = o.max_episodes;
  if (given("--warm-start")) c.spec.orchestrator.warm_start = o.warm_start;
  if (given("--scm")) {
    c.spec.env.scm_path = o.scm_path;
    if (!given("--env")) c.spec.env.name = "scm-file";
  }
  if (given("--archive-csv")) c.spec.env.archive_csv = o.archive_csv;
  if (given("--select-by")) c.spec.orchestrator.select_by = o.select_by == "gain" ? SelectBy::Gain : SelectBy::Reward;
  if (given("--probe-mode")) c.spec.orchestrator.probe.mode = o.probe_mode == "self" ? ProbeMode::Self : ProbeMode::Oracle;
  if (given("--pairs-per-step")) c.spec.dpo.pairs_per_step = o.pairs_per_step == "all" ? PairMode::All : PairMode::BestWorst;
  c.spec.ablations.no_pernode_convergence |= o.no_pernode_convergence;
  c.spec.ablations.no_root_learner |= o.no_root_learner;
  c.spec.ablations.no_dpo |= o.no_dpo;
  c.spec.ablations.no_diversity |= o.no_diversity;
  return c;
}

fs::path output_root(const RunConfig& c) {
  if (!c.output_dir.empty()) return c.output_dir;
  if (const char* env = std::getenv("INTERVENE_OUTPUT_ROOT"); env && *env) return env;
  return "runs";
}

fs::path make_run_dir(const RunConfig& c, const std::string& label) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream stamp;
  stamp << std::put_time(&tm, "%Y%m%d-%H%M%S");
  const fs::path base = output_root(c) / (label + "-" + stamp.str());
  fs::path dir = base;
  for (int i = 1; fs::exists(dir); ++i) dir = base.string() + "-" + std::to_string(i);
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << to_json(c).dump(2) << "\n";
  return dir;
}

void write_run(const fs::path& dir, const RunResult& r) {
  fs::create_directories(dir);
  std::ofstream(dir / "summary.json") << to_json(r).dump(2) << "\n";
  if (r.final_policy) std::ofstream(dir / "policy.json") << r.final_policy->to_json().dump() << "\n";
  std::ofstream log(dir / "episodes.jsonl");
  for (const auto& e : r.logs) log << to_json(e, r.action_names).dump() << "\n";
  std::ofstream csv(dir / "losses.csv");
  csv << "episode";
  for (std::size_t i = 0; i < r.final_ledger.size(); ++i) csv << ",L" << i;
  csv << ",total\n";
  for (const auto& e : r.logs) {
    csv << e.episode;
    double total = 0.0;
    for (double v : e.ledger) {
      csv << "," << format_stat(v);
      total += v;
    }
    csv << "," << format_stat(total) << "\n";
  }
}

void write_experiment(const fs::path& dir, const ExperimentResult& x) {
  for (const auto& r : x.runs) write_run(dir / ("seed-" + std::to_string(r.seed)), r);
  std::ofstream(dir / "summary.json") << to_json(x).dump(2) << "\n";
}

int cmd_run(const RunConfig& c) {
  const auto dir = make_run_dir(c, "run-" + c.spec.env.name + "-" + to_string(c.spec.policy));
  const auto x = run_experiment(c.spec, c.seeds, c.jobs);
  write_experiment(dir, x);
  std::cout << "policy " << to_string(c.spec.policy) << " on " << c.spec.env.name << "\n";
  for (const auto& r : x.runs) {
    std::cout << "  seed " << r.seed << "  episodes " << r.episodes << "  final total "
              << format_stat(r.final_total) << "\n";
  }
  std::cout << "median final total " << format_stat(x.final_total.median) << "\nresults in " << dir.string() << "\n";
  return 0;
}

std::vector<double> finals(const ExperimentResult& x) {
  std::vector<double> v;
  for (const auto& r : x.runs) v.push_back(r.final_total);
  return v;
}

void write_table(const fs::path& dir, const std::string& stem, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::ofstream csv(dir / (stem + ".csv"));
  for (std::size_t i = 0; i < header.size(); ++i) csv << (i ? "," : "") << header[i];
  csv << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) csv << (i ? "," : "") << row[i];
    csv << "\n";
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::ostringstream txt;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) txt << (i ? "  " : "") << std::left << std::setw(int(width[i])) << cells[i];
    txt << "\n";
  };
  line(header);
  for (const auto& row : rows) line(row);
  std::ofstream(dir / (stem + ".txt")) << txt.str();
  std::cout << txt.str();
}

int cmd_bench(RunConfig c) {
  if (c.bench_policies.size() < 2) throw Error(Errc::ConfigError, "bench needs at least two policies");
  c.spec.orchestrator.fixed_episodes = c.spec.orchestrator.fixed_episodes.value_or(c.bench_episodes);
  const auto dir = make_run_dir(c, "bench-" + c.spec.env.name);
  std::vector<ExperimentResult> results;
  for (const auto& name : c.bench_policies) {
    ExperimentSpec spec = c.spec;
    spec.policy = parse_policy(name);
    results.push_back(run_experiment(spec, c.seeds, c.jobs));
    write_experiment(dir / name, results.back());
  }
  const auto main = finals(results.front());
  const std::size_t comparisons = results.size() - 1;
  const double threshold = bonferroni_threshold(0.05, comparisons);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& s = results[i].final_total;
    std::vector<std::string> row{c.bench_policies[i], std::to_string(*c.spec.orchestrator.fixed_episodes),
                                 format_stat(s.mean), format_stat(s.std), format_stat(s.ci.lo), format_stat(s.ci.hi),
                                 format_stat(s.median)};
    if (i == 0) {
      row.insert(row.end(), {"", "", "", ""});
    } else {
      const auto base = finals(results[i]);
      row.push_back(format_stat(100.0 * (s.mean - results.front().final_total.mean) / s.mean));
      try {
        const auto tt = paired_t_test(main, base);
        row.push_back(format_stat(tt.p));
        row.push_back(tt.p < threshold ? "yes" : "no");
      } catch (const Error& e) {
        row.insert(row.end(), {"nan", "no"});
      }
      row.push_back(format_stat(cohens_d(main, base)));
    }
    rows.push_back(std::move(row));
  }
  write_table(dir, "bench",
              {"method", "episodes", "mean", "std", "ci_lo", "ci_hi", "median", "improvement_pct", "p_value",
               "significant", "cohens_d"},
              rows);
  std::cout << "results in " << dir.string() << "\n";
  return 0;
}

int cmd_ablate(const RunConfig& c) {
  const auto dir = make_run_dir(c, "ablate-" + c.spec.env.name);
  const std::vector<std::pair<std::string, Ablations>> variants{
      {"full", {}},
      {"no-pernode-convergence", {true, false, false, false}},
      {"no-root-learner", {false, true, false, false}},
      {"no-dpo", {false, false, true, false}},
      {"no-diversity", {false, false, false, true}},
  };
  std::vector<std::vector<std::string>> rows;
  double full = 0.0;
  for (const auto& [name, ab] : variants) {
    ExperimentSpec spec = c.spec;
    spec.ablations = ab;
    const auto x = run_experiment(spec, c.seeds, c.jobs);
    write_experiment(dir / name, x);
    std::vector<double> eps;
    for (const auto& r : x.runs) eps.push_back(static_cast<double>(r.episodes));
    if (name == "full") full = x.final_total.mean;
    rows.push_back({name, format_stat(mean(eps)), format_stat(x.final_total.mean), format_stat(x.final_total.std),
                    format_stat(x.final_total.median),
                    name == "full" ? "" : format_stat(100.0 * (x.final_total.mean - full) / full)});
  }
  write_table(dir, "ablation", {"variant", "episodes", "mean", "std", "median", "degradation_pct"}, rows);
  std::cout << "results in " << dir.string() << "\n";
  return 0;
}

int cmd_plotdata(const fs::path& run_dir) {
  std::vector<fs::path> logs;
  if (fs::is_directory(run_dir)) {
    for (const auto& e : fs::recursive_directory_iterator(run_dir)) {
      if (e.path().filename() == "episodes.jsonl") logs.push_back(e.path());
    }
  }
  if (logs.empty()) throw Error(Errc::MissingLogs, "no episodes.jsonl under " + run_dir.string());
  std::sort(logs.begin(), logs.end());
  const fs::path out = run_dir / "plot";
  fs::create_directories(out);
  std::ofstream hist(out / "histogram.csv");
  std::ofstream rewards(out / "rewards.csv");
  hist << "run,node,name,count\n";
  rewards << "run,episode,info_gain,importance,diversity,total\n";
  for (const auto& path : logs) {
    const std::string run = fs::relative(path.parent_path(), run_dir).generic_string();
    std::string tag = run;
    std::replace(tag.begin(), tag.end(), '/', '_');
    std::ifstream in(path);
    std::ofstream curve(out / ("curves_" + tag + ".csv"));
    std::map<std::size_t, std::pair<std::string, std::size_t>> counts;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ParseError, path.string() + ": " + e.what());
      }
      const auto& ledger = j.at("ledger");
      if (!header) {
        curve << "episode";
        for (std::size_t i = 0; i < ledger.size(); ++i) curve << ",L" << i;
        curve << "\n";
        header = true;
      }
      curve << j.at("episode").get<std::size_t>();
      for (const auto& v : ledger) curve << "," << (v.is_null() ? "inf" : format_double(v.get<double>()));
      curve << "\n";
      const auto& iv = j.at("intervention");
      auto& slot = counts[iv.at("node").get<std::size_t>()];
      slot.first = iv.at("name").get<std::string>();
      ++slot.second;
      const auto& chosen = j.at("candidates").at(j.at("executed").get<std::size_t>()).at("reward");
      if (!chosen.is_null()) {
        rewards << run << "," << j.at("episode").get<std::size_t>();
        for (const char* k : {"info_gain", "importance", "diversity", "total"}) {
          rewards << "," << format_double(chosen.at(k).get<double>());
        }
        rewards << "\n";
      }
    }
    for (const auto& [node, nc] : counts) hist << run << "," << node << "," << nc.first << "," << nc.second << "\n";
  }
  std::cout << "plot data for " << logs.size() << " runs in " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intervention selection experiments on structural causal models and related environments"};
  app.require_subcommand(1);

  Overrides o;
  auto* run = app.add_subcommand("run", "Run one policy over the seeds and write results");
  add_common(*run, o, true);
  auto* bench = app.add_subcommand("bench", "Compare policies at an equal episode budget");
  add_common(*bench, o, false);
  bench->add_option("--policies", o.policies, "Policies to compare; the first is the method under test");
  auto* ablate = app.add_subcommand("ablate", "Full configuration plus four single-component ablations");
  add_common(*ablate, o, true);
  std::string run_dir;
  auto* plot = app.add_subcommand("plotdata", "Write plot-ready CSVs for a results directory");
  plot->add_option("run_dir", run_dir, "Directory written by run, bench or ablate")->required();
  auto* self = app.add_subcommand("selftest", "Gradient and semantics property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (self->parsed()) return run_selftest(std::cout) ? 0 : 2;
    if (plot->parsed()) return cmd_plotdata(run_dir);
    if (run->parsed()) return cmd_run(resolve(*run, o));
    if (ablate->parsed()) return cmd_ablate(resolve(*ablate, o));
    if (bench->parsed()) {
      auto c = resolve(*bench, o);
      if (bench->count("--policies")) {
        for (const auto& p : o.policies) parse_policy(p);
        c.bench_policies = o.policies;
      }
      if (bench->count("--episodes")) c.bench_episodes = o.episodes;
      return cmd_bench(c);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>

#include "intervene/environment.hpp"
#include "intervene/orchestrator.hpp"
#include "intervene/policy.hpp"

using namespace intervene;

namespace {

struct Setup {
  std::unique_ptr<Environment> env;
  ValidationSet val;
  std::unique_ptr<Learner> learner;
  History history;

  explicit Setup(const std::string& name)
      : env(make_environment([&] {
          EnvironmentOptions o;
          o.name = name;
          return o;
        }())),
        val(env->make_validation(1)),
        history(env->action_count(), ValueGrid(env->value_range())) {
    Rng rng(1);
    learner = env->make_learner(LearnerConfig{}, rng);
    learner->evaluate(val);
  }

  const MechanismLearner& mechanisms() const { return dynamic_cast<const MechanismLearner&>(*learner); }
};

Setup& scm15() {
  static Setup s("scm15");
  return s;
}

std::vector<Candidate> candidates(std::size_t k, std::size_t n) {
  Rng rng(3);
  std::vector<Candidate> c;
  for (std::size_t i = 0; i < k; ++i) c.push_back({{uniform_index(rng, n), uniform(rng, -4, 4)}, 0, {}});
  return c;
}

void BM_ScoreCandidates(benchmark::State& state) {
  auto& s = scm15();
  OrchestratorConfig cfg;
  const auto base = candidates(static_cast<std::size_t>(state.range(0)), s.env->action_count());
  for (auto _ : state) {
    auto c = base;
    score_candidates(c, *s.learner, *s.env, s.val, s.history, cfg, 7);
    benchmark::DoNotOptimize(c);
  }
}

void BM_ScoreCandidatesSerial(benchmark::State& state) {
  auto& s = scm15();
  OrchestratorConfig cfg;
  const auto base = candidates(static_cast<std::size_t>(state.range(0)), s.env->action_count());
  for (auto _ : state) {
    auto c = base;
    score_candidates_serial(c, *s.learner, *s.env, s.val, s.history, cfg, 7);
    benchmark::DoNotOptimize(c);
  }
}

void BM_ValidationLosses(benchmark::State& state) {
  auto& s = scm15();
  for (auto _ : state) benchmark::DoNotOptimize(s.mechanisms().validation_losses(s.val));
}

void BM_ValidationLossesSerial(benchmark::State& state) {
  auto& s = scm15();
  for (auto _ : state) benchmark::DoNotOptimize(s.mechanisms().validation_losses_serial(s.val));
}

void BM_MaxVariance(benchmark::State& state) {
  auto& s = scm15();
  const auto grid = integer_grid(s.env->value_range());
  for (auto _ : state) benchmark::DoNotOptimize(propose_max_variance(s.mechanisms(), grid, 20, 5));
}

void BM_MaxVarianceSerial(benchmark::State& state) {
  auto& s = scm15();
  const auto grid = integer_grid(s.env->value_range());
  for (auto _ : state) benchmark::DoNotOptimize(propose_max_variance_serial(s.mechanisms(), grid, 20, 5));
}

void BM_RunExperiment(benchmark::State& state) {
  ExperimentSpec spec;
  spec.policy = PolicyKind::RandomLookahead;
  spec.orchestrator.fixed_episodes = 20;
  const auto jobs = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment(spec, default_seeds(), jobs));
}

}  // namespace

BENCHMARK(BM_ScoreCandidates)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ScoreCandidatesSerial)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ValidationLosses)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ValidationLossesSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MaxVariance)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MaxVarianceSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RunExperiment)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "intervene/environment.hpp"
#include "intervene/orchestrator.hpp"
#include "test_support.hpp"

using namespace intervene;

namespace {

EnvironmentOptions scm5() { return EnvironmentOptions{}; }

struct Fixture {
  std::unique_ptr<Environment> env = make_environment(scm5());
  ValidationSet val = env->make_validation(11);
  std::unique_ptr<Learner> learner;

  explicit Fixture(std::uint64_t seed) {
    Rng rng(seed);
    learner = env->make_learner(LearnerConfig{}, rng);
    learner->evaluate(val);
  }
};

ExperimentSpec short_spec(PolicyKind policy, std::size_t episodes, std::size_t warm = 10) {
  ExperimentSpec s;
  s.policy = policy;
  s.orchestrator.fixed_episodes = episodes;
  s.orchestrator.warm_start = warm;
  return s;
}

std::vector<Candidate> grid_candidates(std::uint64_t seed, std::size_t k) {
  Rng rng(seed);
  const ValueGrid grid(Interval{-5, 5});
  std::vector<Candidate> c;
  for (std::size_t i = 0; i < k; ++i) c.push_back({{uniform_index(rng, 5), grid.center(uniform_index(rng, 41))}, 0, {}});
  return c;
}

}  // namespace

TEST(Environment, ScmValidationLayout) {
  const auto env = make_environment(scm5());
  const auto val = env->make_validation(1);
  // observational part plus five values for each of X1, X2, X4
  ASSERT_EQ(val.parts.size(), 16u);
  EXPECT_EQ(val.parts[0].rows(), 200u);
  EXPECT_FALSE(val.parts[0].provenance());
  EXPECT_EQ(val.rows(), 200u + 15u * 40u);
  std::vector<std::size_t> nodes;
  for (std::size_t i = 1; i < val.parts.size(); ++i) nodes.push_back(val.parts[i].provenance()->node);
  EXPECT_EQ(std::count(nodes.begin(), nodes.end(), 0u), 5);
  EXPECT_EQ(std::count(nodes.begin(), nodes.end(), 1u), 5);
  EXPECT_EQ(std::count(nodes.begin(), nodes.end(), 3u), 5);
  const auto again = env->make_validation(1);
  for (std::size_t i = 0; i < val.parts.size(); ++i) EXPECT_EQ(val.parts[i], again.parts[i]);
}

TEST(Environment, Factory) {
  EnvironmentOptions o;
  o.name = "scm15";
  EXPECT_EQ(make_environment(o)->action_count(), 15u);
  o.name = "duffing";
  const auto d = make_environment(o);
  EXPECT_EQ(d->action_count(), 3u);
  Rng rng(1);
  const auto traj = d->execute({1, 0.0}, 50, rng);
  EXPECT_EQ(traj.rows(), 50u);
  for (double v : traj.column(1)) EXPECT_EQ(v, 0.0);
  o.name = "archive";
  const auto a = make_environment(o);
  EXPECT_FALSE(a->has_value());
  EXPECT_EQ(a->action_count(), 4u);
  EXPECT_FALSE(a->ledger_index(0));
  o.name = "nope";
  EXPECT_ERRC(make_environment(o), Errc::UnknownEnvironment);
}

TEST(InfoGain, OriginalLearnerUntouchedAndDeterministic) {
  Fixture f(3);
  const auto* m = dynamic_cast<const MechanismLearner*>(f.learner.get());
  const auto before = m->to_json();
  Rng a(5), b(5);
  const double g1 = estimate_info_gain(*f.learner, *f.env, f.val, {0, 4.0}, ProbeConfig{}, a);
  const double g2 = estimate_info_gain(*f.learner, *f.env, f.val, {0, 4.0}, ProbeConfig{}, b);
  EXPECT_EQ(g1, g2);
  EXPECT_EQ(m->to_json(), before);
}

TEST(InfoGain, NoImprovementForPerfectLearner) {
  // X1 ~ N(0,1), X2 = 0 exactly; a zero network is already perfect for X2 and
  // do(X1) rows never reach the X1 root model.
  auto graph = CausalGraph::create({"X1", "X2"}, {{0, 1}});
  OracleScm scm(graph, {Mechanism{RootForm{0, 1}, 0.0}, Mechanism{LinearForm{{0.0}, 0.0}, 0.0}});
  ScmEnvironment env("tiny", scm, 32);
  const auto val = env.make_validation(2);
  Rng rng(2);
  MechanismLearner l(std::make_shared<const CausalGraph>(graph), LearnerConfig{}, rng);
  auto p = l.node_params(1);
  std::fill(p.begin(), p.end(), 0.0);
  l.evaluate(val);
  for (double v : {-4.0, 0.0, 3.0}) {
    Rng r(7);
    EXPECT_LE(estimate_info_gain(l, env, val, {0, v}, ProbeConfig{}, r), 1e-9);
  }
}

TEST(InfoGain, RootWithTwoChildrenBeatsSink) {
  std::size_t wins = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    Fixture f(1000 + s);
    Rng a(s), b(s);
    const double g1 = estimate_info_gain(*f.learner, *f.env, f.val, {0, 4.0}, ProbeConfig{}, a);
    const double g5 = estimate_info_gain(*f.learner, *f.env, f.val, {4, 0.0}, ProbeConfig{}, b);
    if (g1 > g5) ++wins;
  }
  EXPECT_GE(wins, 40u) << wins << "/50 trials";
}

TEST(InfoGain, SelfModeNeedsGenerativeLearner) {
  EnvironmentOptions o;
  o.name = "duffing";
  const auto env = make_environment(o);
  const auto val = env->make_validation(1);
  Rng rng(1);
  auto l = env->make_learner(LearnerConfig{}, rng);
  l->evaluate(val);
  ProbeConfig probe;
  probe.mode = ProbeMode::Self;
  EXPECT_ERRC(estimate_info_gain(*l, *env, val, {0, 1.0}, probe, rng), Errc::ProbeModeUnavailable);

  Fixture f(2);
  EXPECT_NO_THROW(estimate_info_gain(*f.learner, *f.env, f.val, {0, 1.0}, probe, rng));
}

TEST(Reward, ImportanceExamples) {
  EXPECT_DOUBLE_EQ(node_importance(3, {1, 1, 1, 1, 1}), 0.2);
  EXPECT_EQ(node_importance(2, {0, 0, 3, 0, 0}), 1.0);
  EXPECT_EQ(node_importance(1, {0, 0, 0, 0, 0}), 0.0);
}

TEST(Reward, DiversityExamples) {
  const ValueGrid grid(Interval{-5, 5});
  History h(5, grid);
  EXPECT_EQ(diversity(2, 1.0, h), 1.0);
  for (int i = 0; i < 1000; ++i) h.record({2, i % 4 == 0 ? 1.0 : -3.0});
  const double c = static_cast<double>(h.bin_count(2, *grid.snap(1.0)));
  EXPECT_NEAR(diversity(2, 1.0, h), 0.5 / (1.0 + c), 1e-12);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const double d = diversity(uniform_index(rng, 5), grid.center(uniform_index(rng, 41)), h);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
  }
}

TEST(Reward, CombineArithmetic) {
  const auto r = RewardBreakdown::combine(2.0, 0.5, 1.0, 0.1, 0.05);
  EXPECT_NEAR(r.total, 2.10, 1e-12);
  EXPECT_EQ(RewardBreakdown::combine(0, 0, 0, 0.1, 0.05).total, 0.0);
  // |alpha w + gamma D| <= 0.15 for w, D in [0, 1]
  const OrchestratorConfig cfg;
  EXPECT_LE(cfg.alpha * 1.0 + cfg.gamma * 1.0, 0.15 + 1e-15);
}

TEST(Reward, ScoreComponentsSumToTotal) {
  Fixture f(4);
  History h(5, ValueGrid(Interval{-5, 5}));
  h.record({1, 2.0});
  OrchestratorConfig cfg;
  Rng rng(3);
  for (const auto& c : grid_candidates(9, 6)) {
    const auto r = score(c, *f.learner, *f.env, f.val, h, cfg, rng);
    EXPECT_NEAR(r.info_gain + cfg.alpha * r.importance + cfg.gamma * r.diversity, r.total, 1e-12);
    EXPECT_DOUBLE_EQ(r.importance, node_importance(c.iv.node, f.learner->ledger()));
    EXPECT_DOUBLE_EQ(r.diversity, diversity(c.iv.node, c.iv.value, h));
  }
}

TEST(Scoring, ParallelMatchesSerialAndIsolated) {
  Fixture f(5);
  const auto* m = dynamic_cast<const MechanismLearner*>(f.learner.get());
  const auto before = m->to_json();
  History h(5, ValueGrid(Interval{-5, 5}));
  auto a = grid_candidates(3, 8);
  auto b = a;
  score_candidates(a, *f.learner, *f.env, f.val, h, OrchestratorConfig{}, 77);
  score_candidates_serial(b, *f.learner, *f.env, f.val, h, OrchestratorConfig{}, 77);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_TRUE(a[i].reward && b[i].reward);
    EXPECT_EQ(a[i].reward->total, b[i].reward->total);
    EXPECT_EQ(a[i].reward->info_gain, b[i].reward->info_gain);
  }
  EXPECT_EQ(m->to_json(), before);
}

TEST(Scoring, SelectionRules) {
  std::vector<Candidate> c(3);
  c[0].reward = RewardBreakdown::combine(0.0, 1.0, 1.0, 0.1, 0.05);
  c[1].reward = RewardBreakdown::combine(0.1, 0.0, 0.0, 0.1, 0.05);
  c[2].reward = RewardBreakdown::combine(0.0, 1.0, 1.0, 0.1, 0.05);
  EXPECT_EQ(select_candidate(c, SelectBy::Reward), 0u);
  EXPECT_EQ(select_candidate(c, SelectBy::Gain), 1u);
}

TEST(Convergence, MinimumEpisodes) {
  ConvergenceConfig cfg;
  std::vector<std::vector<double>> h;
  std::size_t at = 0;
  for (std::size_t e = 1; e <= 100 && !at; ++e) {
    h.push_back(std::vector<double>(5, 0.0));
    if (check_convergence(h, cfg)) at = e;
  }
  EXPECT_EQ(at, 40u);
}

TEST(Convergence, NodeAboveThresholdNeverConverges) {
  ConvergenceConfig cfg;
  std::vector<std::vector<double>> h;
  for (std::size_t e = 0; e < cfg.max_episodes; ++e) {
    h.push_back({0, 0, cfg.threshold + 0.01, 0, 0});
    EXPECT_FALSE(check_convergence(h, cfg));
  }
}

TEST(Convergence, WindowOfTen) {
  ConvergenceConfig cfg;
  std::vector<std::vector<double>> h(50, std::vector<double>(5, 1.0));
  for (int i = 0; i < 9; ++i) h.push_back(std::vector<double>(5, 0.0));
  EXPECT_FALSE(check_convergence(h, cfg));
  h.push_back(std::vector<double>(5, 0.0));
  EXPECT_TRUE(check_convergence(h, cfg));
  h.push_back({0, 0, 0, 0, 0.5});
  EXPECT_FALSE(check_convergence(h, cfg));
}

TEST(Convergence, PerNodeThresholds) {
  ConvergenceConfig cfg;
  cfg.thresholds = {0.1, 0.1, 1.0, 0.1, 0.1};
  std::vector<std::vector<double>> h(40, {0.0, 0.0, 0.5, 0.0, 0.0});
  EXPECT_TRUE(check_convergence(h, cfg));
}

TEST(WarmStart, BufferAccountingAndNoop) {
  const auto env = make_environment(scm5());
  const auto val = env->make_validation(1);
  Rng rng(1);
  auto l = env->make_learner(LearnerConfig{}, rng);
  l->evaluate(val);
  const auto r = warm_start(nullptr, *env, *l, val, 200, OrchestratorConfig{}, 5);
  EXPECT_EQ(r.interventions, 200u);
  EXPECT_EQ(l->buffer_rows(), 200u * env->default_rows());

  Rng rng2(1);
  auto l0 = env->make_learner(LearnerConfig{}, rng2);
  l0->evaluate(val);
  const auto before = dynamic_cast<MechanismLearner*>(l0.get())->to_json();
  warm_start(nullptr, *env, *l0, val, 0, OrchestratorConfig{}, 5);
  EXPECT_EQ(dynamic_cast<MechanismLearner*>(l0.get())->to_json(), before);
}

TEST(WarmStart, ImprovesOnFreshLearner) {
  const auto env = make_environment(scm5());
  std::size_t better = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto val = env->make_validation(s);
    Rng rng(s);
    auto l = env->make_learner(LearnerConfig{}, rng);
    const double fresh = [&] {
      l->evaluate(val);
      return l->total_loss();
    }();
    warm_start(nullptr, *env, *l, val, 200, OrchestratorConfig{}, s);
    l->evaluate(val);
    if (l->total_loss() < fresh) ++better;
  }
  EXPECT_GE(better, 19u);
}

TEST(WarmStart, BehaviourCloningFitsLabels) {
  const auto env = make_environment(scm5());
  const auto val = env->make_validation(3);
  Rng rng(3);
  auto l = env->make_learner(LearnerConfig{}, rng);
  l->evaluate(val);
  TrainablePolicy p(16, 5, ValueGrid(Interval{-5, 5}), 64, rng);
  const auto r = warm_start(&p, *env, *l, val, 20, OrchestratorConfig{}, 3);
  EXPECT_EQ(r.labels, 20u);
  EXPECT_LT(r.bc_final_nll, r.bc_initial_nll);
}

TEST(Run, DeterministicAndAccounted) {
  const auto spec = short_spec(PolicyKind::Dpo, 12);
  const auto a = run_single(spec, 42);
  const auto b = run_single(spec, 42);
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_EQ(a.episodes, 12u);
  EXPECT_EQ(a.executed_interventions, 12u);
  EXPECT_EQ(a.probe_rows, 12u * 4u * 16u);
  std::size_t hist = 0;
  for (auto c : a.histogram) hist += c;
  EXPECT_EQ(hist, a.executed_interventions);
  for (const auto& log : a.logs) EXPECT_EQ(log.ledger.size(), 5u);
  ASSERT_TRUE(a.warm_policy && a.final_policy);
  EXPECT_FALSE(*a.warm_policy == *a.final_policy);
}

TEST(Run, ExecutedCandidateFollowsSelectionRule) {
  for (SelectBy by : {SelectBy::Reward, SelectBy::Gain}) {
    auto spec = short_spec(PolicyKind::RandomLookahead, 8);
    spec.orchestrator.select_by = by;
    const auto r = run_single(spec, 7);
    for (const auto& log : r.logs) {
      const auto& ex = *log.candidates[log.executed].reward;
      for (const auto& c : log.candidates) {
        if (by == SelectBy::Reward) EXPECT_GE(ex.total, c.reward->total);
        else EXPECT_GE(ex.info_gain, c.reward->info_gain);
      }
    }
  }
}

TEST(Run, NoDpoFreezesPolicy) {
  auto spec = short_spec(PolicyKind::Dpo, 30);
  spec.ablations.no_dpo = true;
  const auto r = run_single(spec, 3);
  ASSERT_TRUE(r.warm_policy && r.final_policy);
  EXPECT_TRUE(*r.warm_policy == *r.final_policy);
}

TEST(Run, DpoAndPpoShareRewardStream) {
  const auto d = run_single(short_spec(PolicyKind::Dpo, 1), 5);
  const auto p = run_single(short_spec(PolicyKind::Ppo, 1), 5);
  ASSERT_EQ(d.logs[0].candidates.size(), p.logs[0].candidates.size());
  for (std::size_t i = 0; i < d.logs[0].candidates.size(); ++i) {
    EXPECT_EQ(d.logs[0].candidates[i].iv, p.logs[0].candidates[i].iv);
    EXPECT_EQ(d.logs[0].candidates[i].reward->total, p.logs[0].candidates[i].reward->total);
  }
}

TEST(Run, ConvergenceCapAndAblationBudget) {
  auto spec = short_spec(PolicyKind::Random, 0);
  spec.orchestrator.fixed_episodes.reset();
  spec.orchestrator.convergence.threshold = 1e-12;
  spec.orchestrator.convergence.max_episodes = 45;
  const auto r = run_single(spec, 1);
  EXPECT_EQ(r.episodes, 45u);
  EXPECT_FALSE(r.convergence_episode);

  auto ab = short_spec(PolicyKind::Random, 0);
  ab.orchestrator.fixed_episodes.reset();
  ab.ablations.no_pernode_convergence = true;
  EXPECT_EQ(run_single(ab, 1).episodes, 100u);
}

TEST(Run, RandomColliderParentFraction) {
  const auto x = run_experiment(short_spec(PolicyKind::Random, 171), default_seeds(), 5);
  EXPECT_NEAR(x.metrics.at("collider_parent_fraction").mean, 0.4, 0.05);
}

TEST(Run, ParallelSeedsMatchSerial) {
  const auto spec = short_spec(PolicyKind::RandomLookahead, 6);
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  EXPECT_EQ(to_json(run_experiment(spec, seeds, 1)), to_json(run_experiment(spec, seeds, 3)));
}

TEST(Run, OtherEnvironmentsAndPolicies) {
  for (const char* env : {"scm15", "duffing", "archive"}) {
    auto spec = short_spec(PolicyKind::Dpo, 3, 4);
    spec.env.name = env;
    const auto r = run_single(spec, 1);
    EXPECT_EQ(r.episodes, 3u) << env;
  }
  for (auto kind : {PolicyKind::RoundRobin, PolicyKind::MaxVariance, PolicyKind::Ppo}) {
    const auto r = run_single(short_spec(kind, 12, 4), 1);
    EXPECT_EQ(r.episodes, 12u) << to_string(kind);
  }
  auto spec = short_spec(PolicyKind::MaxVariance, 2);
  spec.env.name = "duffing";
  EXPECT_ERRC(run_single(spec, 1), Errc::InvalidArgument);
}

TEST(Run, PolicyNames) {
  for (const char* n : {"random", "roundrobin", "maxvar", "ppo", "dpo", "random-lookahead"}) {
    EXPECT_EQ(to_string(parse_policy(n)), n);
  }
  EXPECT_ERRC(parse_policy("llm"), Errc::UnknownPolicy);
  EXPECT_EQ(default_seeds(), (std::vector<std::uint64_t>{42, 123, 456, 789, 1011}));
}

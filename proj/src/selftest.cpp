#include "intervene/selftest.hpp"

#include <cmath>
#include <functional>
#include <string>

#include "intervene/gradcheck.hpp"
#include "intervene/learner.hpp"
#include "intervene/orchestrator.hpp"
#include "intervene/scm.hpp"
#include "intervene/trainers.hpp"

namespace intervene {

namespace {

struct Tally {
  std::ostream& out;
  bool ok = true;

  void check(const std::string& name, bool pass, const std::string& detail) {
    out << (pass ? "PASS " : "FAIL ") << name << "  " << detail << "\n";
    ok = ok && pass;
  }
};

double predictor_grad_error(std::uint64_t seed) {
  Rng rng(seed);
  auto graph = std::make_shared<const CausalGraph>(build_benchmark_5node().graph());
  LearnerConfig cfg;
  cfg.dropout = 0.0;
  MechanismLearner l(graph, cfg, rng);
  Dataset batch = sample(build_benchmark_5node(), std::nullopt, 16, rng);
  const std::size_t node = 2;
  std::vector<double> grad(l.node_params(node).size(), 0.0);
  l.loss_and_gradient(node, batch, grad);
  std::vector<double> scratch;
  return max_fd_relative_error(l.node_params(node), grad, [&] { return l.loss_and_gradient(node, batch, scratch); });
}

double policy_grad_error(std::uint64_t seed) {
  Rng rng(seed);
  TrainablePolicy p(16, 5, ValueGrid({-5, 5}), 8, rng);
  for (auto& w : p.params()) w = uniform(rng, -0.5, 0.5);
  std::vector<double> f(16);
  for (auto& x : f) x = uniform(rng, 0.0, 1.0);
  const Intervention iv{uniform_index(rng, 5), ValueGrid({-5, 5}).center(uniform_index(rng, 41))};
  std::vector<double> grad(p.param_count(), 0.0);
  p.log_prob_grad(f, iv, grad);
  return max_fd_relative_error(p.params(), grad, [&] { return p.log_prob(f, iv); });
}

}  // namespace

bool run_selftest(std::ostream& out) {
  Tally t{out};

  double worst = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) worst = std::max(worst, predictor_grad_error(s));
  t.check("predictor-gradient", worst < 1e-4, "max rel err " + std::to_string(worst));

  worst = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) worst = std::max(worst, policy_grad_error(s));
  t.check("policy-logprob-gradient", worst < 1e-4, "max rel err " + std::to_string(worst));

  {
    Rng rng(7);
    TrainablePolicy p(16, 5, ValueGrid({-5, 5}), 8, rng);
    PreferencePair pair{std::vector<double>(16, 0.5), {{0, 1.0}, 0, std::nullopt}, {{3, -2.0}, 0, std::nullopt}};
    const double loss = dpo_loss(p, p, pair, 0.1);
    t.check("dpo-loss-at-reference", std::abs(loss - std::log(2.0)) < 1e-9, "loss " + std::to_string(loss));
  }

  {
    Rng rng(11);
    double err = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> r(10);
      std::vector<double> v(10);
      for (auto& x : r) x = standard_normal(rng);
      for (auto& x : v) x = standard_normal(rng);
      const double boot = standard_normal(rng);
      const auto g = compute_gae(r, v, boot, 0.95, 0.99);
      for (std::size_t i = 0; i < 10; ++i) {
        double direct = 0.0;
        double coef = 1.0;
        for (std::size_t k = i; k < 10; ++k) {
          const double next = k + 1 < 10 ? v[k + 1] : boot;
          direct += coef * (r[k] + 0.99 * next - v[k]);
          coef *= 0.99 * 0.95;
        }
        err = std::max(err, std::abs(direct - g.advantages[i]));
      }
    }
    t.check("gae-direct-sum", err < 1e-12, "max abs err " + std::to_string(err));
  }

  {
    const auto scm = build_benchmark_5node();
    Rng rng(3);
    const auto d = sample(scm, Intervention{1, 2.5}, 100, rng);
    bool constant = true;
    for (double x : d.column(1)) constant = constant && x == 2.5;
    t.check("do-constant-column", constant, "do(X2=2.5), 100 rows");
  }

  {
    ConvergenceConfig cfg;
    std::vector<std::vector<double>> h;
    std::size_t at = 0;
    for (std::size_t e = 1; e <= 60 && !at; ++e) {
      h.push_back(std::vector<double>(5, 0.0));
      if (check_convergence(h, cfg)) at = e;
    }
    t.check("convergence-minimum", at == 40, "converged at " + std::to_string(at));
  }

  t.check("bonferroni-threshold", bonferroni_threshold(0.05, 4) == 0.0125, "alpha/m for m=4");
  return t.ok;
}

}  // namespace intervene

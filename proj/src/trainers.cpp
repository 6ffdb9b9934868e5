#include "intervene/trainers.hpp"

#include <algorithm>
#include <cmath>

namespace intervene {

namespace {

constexpr double kTie = 1e-9;

double reward_of(const Candidate& c) {
  if (!c.reward) throw Error(Errc::UnscoredCandidate, "candidate has no reward");
  return c.reward->total;
}

// log(1 + exp(-z)) without overflow.
double softplus_neg(double z) { return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z)); }

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

}  // namespace

std::optional<std::pair<std::size_t, std::size_t>> preference_indices(const std::vector<Candidate>& candidates) {
  if (candidates.size() < 2) throw Error(Errc::InvalidArgument, "preference pairs need K >= 2");
  std::size_t best = 0;
  std::size_t worst = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double r = reward_of(candidates[i]);
    if (r > reward_of(candidates[best])) best = i;
    if (r < reward_of(candidates[worst])) worst = i;
  }
  if (reward_of(candidates[best]) - reward_of(candidates[worst]) < kTie) return std::nullopt;
  return std::pair{best, worst};
}

std::optional<PreferencePair> make_preference_pair(const std::vector<Candidate>& candidates,
                                                   const std::vector<double>& features) {
  const auto idx = preference_indices(candidates);
  if (!idx) return std::nullopt;
  return PreferencePair{features, candidates[idx->first], candidates[idx->second]};
}

std::vector<PreferencePair> make_preference_pairs(const std::vector<Candidate>& candidates,
                                                  const std::vector<double>& features, PairMode mode) {
  std::vector<PreferencePair> out;
  if (mode == PairMode::BestWorst) {
    if (auto p = make_preference_pair(candidates, features)) out.push_back(std::move(*p));
    return out;
  }
  if (candidates.size() < 2) throw Error(Errc::InvalidArgument, "preference pairs need K >= 2");
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      if (reward_of(candidates[i]) - reward_of(candidates[j]) >= kTie) {
        out.push_back({features, candidates[i], candidates[j]});
      }
    }
  }
  return out;
}

double dpo_loss_from_logps(double policy_w, double ref_w, double policy_l, double ref_l, double beta) {
  return softplus_neg(beta * ((policy_w - ref_w) - (policy_l - ref_l)));
}

double dpo_margin(const TrainablePolicy& policy, const TrainablePolicy& reference, const PreferencePair& pair,
                  double beta) {
  const double pw = policy.log_prob(pair.features, pair.winner.iv);
  const double pl = policy.log_prob(pair.features, pair.loser.iv);
  const double rw = reference.log_prob(pair.features, pair.winner.iv);
  const double rl = reference.log_prob(pair.features, pair.loser.iv);
  return beta * ((pw - rw) - (pl - rl));
}

double dpo_loss(const TrainablePolicy& policy, const TrainablePolicy& reference, const PreferencePair& pair,
                double beta, std::span<double> grad, double scale) {
  const double rw = reference.log_prob(pair.features, pair.winner.iv);
  const double rl = reference.log_prob(pair.features, pair.loser.iv);
  const double pw = policy.log_prob(pair.features, pair.winner.iv);
  const double pl = policy.log_prob(pair.features, pair.loser.iv);
  const double z = beta * ((pw - rw) - (pl - rl));
  if (!grad.empty()) {
    // d/dz softplus(-z) = -sigmoid(-z)
    const double dz = -sigmoid(-z) * beta * scale;
    policy.log_prob_grad(pair.features, pair.winner.iv, grad, dz);
    policy.log_prob_grad(pair.features, pair.loser.iv, grad, -dz);
  }
  return softplus_neg(z);
}

DpoStats dpo_update(TrainablePolicy& policy, const TrainablePolicy& reference, const std::vector<PreferencePair>& pairs,
                    const DpoConfig& cfg) {
  DpoStats s;
  if (pairs.empty()) return s;
  std::vector<double> grad(policy.param_count(), 0.0);
  const double scale = 1.0 / static_cast<double>(pairs.size());
  for (const auto& p : pairs) {
    s.loss += scale * dpo_loss(policy, reference, p, cfg.beta, grad, scale);
    s.margin += scale * dpo_margin(policy, reference, p, cfg.beta);
  }
  s.pairs = pairs.size();
  policy.apply_gradient(grad, cfg.lr);
  return s;
}

bool refresh_reference(const TrainablePolicy& policy, TrainablePolicy& reference, std::size_t episode,
                       std::size_t period) {
  if (period == 0) throw Error(Errc::InvalidArgument, "reference refresh period must be >= 1");
  if (episode % period != 0) return false;
  reference = policy;
  return true;
}

GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values, double bootstrap,
                      double lambda, double gamma) {
  if (rewards.size() != values.size()) throw Error(Errc::LengthMismatch, "rewards and values differ in length");
  const std::size_t n = rewards.size();
  GaeResult g{std::vector<double>(n), std::vector<double>(n)};
  double next_value = bootstrap;
  double acc = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double delta = rewards[t] + gamma * next_value - values[t];
    acc = delta + gamma * lambda * acc;
    g.advantages[t] = acc;
    g.returns[t] = acc + values[t];
    next_value = values[t];
  }
  return g;
}

Critic::Critic(std::size_t n_features, std::size_t hidden, Rng& rng) : net_(n_features, hidden, 1) {
  net_.init_uniform(rng);
  adam_ = Adam(net_.param_count());
}

double Critic::value(std::span<const double> features) const {
  double v = 0.0;
  net_.forward(features, {&v, 1});
  return v;
}

double Critic::loss(const std::vector<std::vector<double>>& features, const std::vector<double>& targets,
                    std::span<double> grad) const {
  if (features.size() != targets.size()) throw Error(Errc::LengthMismatch, "critic batch");
  if (features.empty()) return 0.0;
  const double n = static_cast<double>(features.size());
  double total = 0.0;
  TwoLayerNet::Cache cache;
  for (std::size_t i = 0; i < features.size(); ++i) {
    double v = 0.0;
    net_.forward(features[i], {&v, 1}, &cache);
    const double e = v - targets[i];
    total += e * e / n;
    if (!grad.empty()) {
      const double d = 2.0 * e / n;
      net_.backward(cache, {&d, 1}, grad);
    }
  }
  return total;
}

double ppo_surrogate_loss(const TrainablePolicy& policy, const std::vector<PpoSample>& batch, double clip,
                          std::span<double> grad) {
  if (batch.empty()) return 0.0;
  const double n = static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& s : batch) {
    const double lp = policy.log_prob(s.features, s.action);
    const double r = std::exp(lp - s.old_log_prob);
    const double unclipped = r * s.advantage;
    const double clipped = std::clamp(r, 1.0 - clip, 1.0 + clip) * s.advantage;
    loss -= std::min(unclipped, clipped) / n;
    // Gradient flows only through the unclipped branch when it is the active minimum.
    if (!grad.empty() && unclipped <= clipped) {
      policy.log_prob_grad(s.features, s.action, grad, -r * s.advantage / n);
    }
  }
  return loss;
}

double ppo_unclipped_loss(const TrainablePolicy& policy, const std::vector<PpoSample>& batch) {
  if (batch.empty()) return 0.0;
  double loss = 0.0;
  for (const auto& s : batch) {
    loss -= std::exp(policy.log_prob(s.features, s.action) - s.old_log_prob) * s.advantage;
  }
  return loss / static_cast<double>(batch.size());
}

double ppo_policy_loss(const TrainablePolicy& policy, const std::vector<PpoSample>& batch, const PpoConfig& cfg,
                       std::span<double> grad) {
  double loss = ppo_surrogate_loss(policy, batch, cfg.clip, grad);
  if (batch.empty()) return loss;
  const double scale = -cfg.entropy_coef / static_cast<double>(batch.size());
  for (const auto& s : batch) loss += scale * policy.entropy(s.features, grad, scale);
  return loss;
}

PpoStats ppo_update(TrainablePolicy& policy, Critic& critic, const std::vector<Transition>& rollout,
                    const std::vector<double>& next_features, const PpoConfig& cfg) {
  PpoStats st;
  if (rollout.empty()) return st;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::vector<double>> feats;
  for (const auto& t : rollout) {
    rewards.push_back(t.reward);
    values.push_back(critic.value(t.features));
    feats.push_back(t.features);
  }
  const auto gae = compute_gae(rewards, values, critic.value(next_features), cfg.lambda, cfg.gamma);
  std::vector<PpoSample> batch;
  for (std::size_t i = 0; i < rollout.size(); ++i) {
    batch.push_back({rollout[i].features, rollout[i].action, rollout[i].old_log_prob, gae.advantages[i]});
    st.mean_advantage += gae.advantages[i] / static_cast<double>(rollout.size());
  }
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    std::vector<double> pg(policy.param_count(), 0.0);
    const double pl = ppo_policy_loss(policy, batch, cfg, pg);
    std::vector<double> vg(critic.param_count(), 0.0);
    const double vl = critic.loss(feats, gae.returns, vg);
    for (auto& g : vg) g *= cfg.value_coef;
    if (e == 0) {
      st.policy_loss = pl;
      st.value_loss = vl;
    }
    policy.apply_gradient(pg, cfg.lr);
    critic.apply_gradient(vg, cfg.lr);
  }
  for (const auto& s : batch) st.entropy += policy.entropy(s.features) / static_cast<double>(batch.size());
  return st;
}

}  // namespace intervene

#include "intervene/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "intervene/learner.hpp"

namespace intervene {

ValueGrid::ValueGrid(Interval range, double step) : lo_(range.lo), step_(step) {
  if (!(step > 0.0) || range.hi < range.lo) throw Error(Errc::InvalidArgument, "value grid");
  bins_ = static_cast<std::size_t>(std::llround(range.width() / step)) + 1;
}

std::optional<std::size_t> ValueGrid::snap(double value) const {
  const std::size_t b = nearest(value);
  if (std::abs(center(b) - value) <= 1e-9) return b;
  return std::nullopt;
}

std::size_t ValueGrid::nearest(double value) const {
  const double pos = std::round((value - lo_) / step_);
  if (!(pos > 0.0)) return 0;
  return std::min(bins_ - 1, static_cast<std::size_t>(pos));
}

History::History(std::size_t n_actions, ValueGrid grid)
    : grid_(grid), node_counts_(n_actions, 0), bin_counts_(n_actions * grid.size(), 0) {}

void History::record(const Intervention& iv) {
  if (iv.node >= node_counts_.size()) throw Error(Errc::InvalidIndex, "history node " + std::to_string(iv.node));
  executed_.push_back(iv);
  ++node_counts_[iv.node];
  ++bin_counts_[iv.node * grid_.size() + grid_.nearest(iv.value)];
}

std::optional<std::size_t> History::last_node() const {
  if (executed_.empty()) return std::nullopt;
  return executed_.back().node;
}

std::vector<double> featurize(const std::vector<double>& ledger, const History& history, std::size_t t,
                              std::size_t t_max) {
  if (ledger.empty()) throw Error(Errc::LedgerUninitialized, "empty ledger");
  const std::size_t n = history.n_actions();
  std::vector<double> f;
  f.reserve(ledger.size() + 2 * n + 1);
  for (double l : ledger) {
    if (!std::isfinite(l)) throw Error(Errc::LedgerUninitialized, "ledger not evaluated");
    f.push_back(l / (1.0 + l));
  }
  const double total = static_cast<double>(std::max<std::size_t>(1, history.total()));
  for (std::size_t i = 0; i < n; ++i) f.push_back(static_cast<double>(history.node_count(i)) / total);
  const auto last = history.last_node();
  for (std::size_t i = 0; i < n; ++i) f.push_back(last && *last == i ? 1.0 : 0.0);
  f.push_back(t_max ? std::min(1.0, static_cast<double>(t) / static_cast<double>(t_max)) : 0.0);
  return f;
}

RewardBreakdown RewardBreakdown::combine(double info_gain, double importance, double diversity, double alpha,
                                         double gamma) {
  return {info_gain, importance, diversity, info_gain + alpha * importance + gamma * diversity};
}

// --- trainable policy ---------------------------------------------------------

TrainablePolicy::TrainablePolicy(std::size_t n_features, std::size_t n_nodes, ValueGrid grid, std::size_t hidden,
                                 Rng& rng, AdamConfig adam)
    : n_nodes_(n_nodes), grid_(grid), net_(n_features, hidden, n_nodes + grid.size()) {
  if (n_nodes == 0) throw Error(Errc::InvalidArgument, "policy needs at least one node");
  net_.init_uniform(rng);
  net_.zero_output_layer();
  adam_ = Adam(net_.param_count(), adam);
}

TrainablePolicy::Forward TrainablePolicy::forward(std::span<const double> features) const {
  if (features.size() != net_.input_dim()) throw Error(Errc::LengthMismatch, "policy feature length");
  Forward f;
  std::vector<double> logits(net_.output_dim());
  net_.forward(features, logits, &f.cache);
  f.node_logp = log_softmax(std::span<const double>(logits).first(n_nodes_));
  f.bin_logp = log_softmax(std::span<const double>(logits).subspan(n_nodes_));
  return f;
}

void TrainablePolicy::backward(const Forward& f, std::span<const double> d_node_logits,
                               std::span<const double> d_bin_logits, std::span<double> grad) const {
  std::vector<double> d_out(net_.output_dim());
  std::copy(d_node_logits.begin(), d_node_logits.end(), d_out.begin());
  std::copy(d_bin_logits.begin(), d_bin_logits.end(), d_out.begin() + static_cast<std::ptrdiff_t>(n_nodes_));
  net_.backward(f.cache, d_out, grad);
}

namespace {

std::size_t sample_categorical(const std::vector<double>& logp, Rng& rng) {
  const double u = uniform(rng, 0.0, 1.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < logp.size(); ++i) {
    acc += std::exp(logp[i]);
    if (u < acc) return i;
  }
  // Rounding left a sliver past the last cumulative value.
  for (std::size_t i = logp.size(); i-- > 0;) {
    if (std::isfinite(logp[i])) return i;
  }
  return 0;
}

}  // namespace

std::vector<Candidate> TrainablePolicy::propose(std::span<const double> features, std::size_t k, double temperature,
                                                Rng& rng) const {
  if (!(temperature > 0.0)) throw Error(Errc::InvalidArgument, "temperature must be positive");
  const Forward f = forward(features);
  // Tempered distributions from the untempered log-probabilities: logp / T
  // differs from logits / T only by a constant.
  const auto node_t = log_softmax(f.node_logp, temperature);
  const auto bin_t = log_softmax(f.bin_logp, temperature);
  std::vector<Candidate> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t node = sample_categorical(node_t, rng);
    const std::size_t bin = sample_categorical(bin_t, rng);
    out.push_back({{node, grid_.center(bin)}, f.node_logp[node] + f.bin_logp[bin], std::nullopt});
  }
  return out;
}

double TrainablePolicy::log_prob(std::span<const double> features, const Intervention& iv) const {
  return log_prob_grad(features, iv, {}, 0.0);
}

double TrainablePolicy::log_prob_grad(std::span<const double> features, const Intervention& iv,
                                      std::span<double> grad, double scale) const {
  if (iv.node >= n_nodes_) throw Error(Errc::InvalidIndex, "policy node " + std::to_string(iv.node));
  const auto bin = grid_.snap(iv.value);
  if (!bin) throw Error(Errc::ValueNotOnGrid, format_double(iv.value));
  const Forward f = forward(features);
  if (!grad.empty() && scale != 0.0) {
    std::vector<double> dn(n_nodes_);
    std::vector<double> db(grid_.size());
    for (std::size_t i = 0; i < dn.size(); ++i) dn[i] = scale * ((i == iv.node ? 1.0 : 0.0) - std::exp(f.node_logp[i]));
    for (std::size_t i = 0; i < db.size(); ++i) db[i] = scale * ((i == *bin ? 1.0 : 0.0) - std::exp(f.bin_logp[i]));
    backward(f, dn, db, grad);
  }
  return f.node_logp[iv.node] + f.bin_logp[*bin];
}

namespace {

double categorical_entropy(const std::vector<double>& logp, std::vector<double>* d_logits, double scale) {
  double h = 0.0;
  for (double lp : logp) h -= std::exp(lp) * lp;
  if (d_logits) {
    d_logits->resize(logp.size());
    for (std::size_t i = 0; i < logp.size(); ++i) (*d_logits)[i] = -scale * std::exp(logp[i]) * (logp[i] + h);
  }
  return h;
}

}  // namespace

double TrainablePolicy::entropy(std::span<const double> features, std::span<double> grad, double scale) const {
  const Forward f = forward(features);
  const bool want = !grad.empty() && scale != 0.0;
  std::vector<double> dn;
  std::vector<double> db;
  const double h = categorical_entropy(f.node_logp, want ? &dn : nullptr, scale) +
                   categorical_entropy(f.bin_logp, want ? &db : nullptr, scale);
  if (want) backward(f, dn, db, grad);
  return h;
}

void TrainablePolicy::apply_gradient(std::span<const double> grad, double lr) { adam_.step(net_.params(), grad, lr); }

TrainablePolicy TrainablePolicy::relabeled(const std::vector<std::size_t>& perm) const {
  const std::size_t n = n_nodes_;
  if (perm.size() != n) throw Error(Errc::LengthMismatch, "permutation length");
  if (net_.input_dim() != 3 * n + 1) throw Error(Errc::InvalidArgument, "relabeling needs 3n+1 features");
  TrainablePolicy p = *this;
  const std::size_t h = net_.hidden_dim();
  for (std::size_t u = 0; u < h; ++u) {
    for (std::size_t block = 0; block < 3; ++block) {
      for (std::size_t j = 0; j < n; ++j) p.net_.w1(u, block * n + j) = net_.w1(u, block * n + perm[j]);
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t u = 0; u < h; ++u) p.net_.w2(j, u) = net_.w2(perm[j], u);
    p.net_.b2(j) = net_.b2(perm[j]);
  }
  p.adam_ = Adam(net_.param_count(), {});
  return p;
}

namespace {

nlohmann::json tensor(std::vector<std::size_t> shape, std::span<const double> data) {
  return {{"shape", shape}, {"data", std::vector<double>(data.begin(), data.end())}};
}

std::vector<double> read_tensor(const nlohmann::json& t, std::size_t expected) {
  auto data = t.at("data").get<std::vector<double>>();
  std::size_t n = 1;
  for (auto s : t.at("shape").get<std::vector<std::size_t>>()) n *= s;
  if (n != data.size() || data.size() != expected) throw Error(Errc::ParseError, "tensor shape mismatch");
  return data;
}

}  // namespace

nlohmann::json TrainablePolicy::to_json() const {
  const std::size_t in = net_.input_dim();
  const std::size_t h = net_.hidden_dim();
  const std::size_t out = net_.output_dim();
  const auto p = net_.params();
  nlohmann::json j;
  j["format"] = "intervene-tensor-map";
  j["version"] = 1;
  j["kind"] = "policy";
  j["n_nodes"] = n_nodes_;
  j["grid"] = {{"lo", grid_.center(0)}, {"hi", grid_.center(grid_.size() - 1)}, {"bins", grid_.size()}};
  auto& t = j["tensors"];
  t["policy.w1"] = tensor({h, in}, p.subspan(0, h * in));
  t["policy.b1"] = tensor({h}, p.subspan(h * in, h));
  t["policy.w2"] = tensor({out, h}, p.subspan(h * in + h, out * h));
  t["policy.b2"] = tensor({out}, p.subspan(h * in + h + out * h, out));
  t["policy.adam_m"] = tensor({p.size()}, adam_.first_moment());
  t["policy.adam_v"] = tensor({p.size()}, adam_.second_moment());
  j["adam_steps"] = adam_.steps_taken();
  return j;
}

TrainablePolicy TrainablePolicy::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "intervene-tensor-map" || j.at("version") != 1 || j.at("kind") != "policy") {
      throw Error(Errc::ParseError, "unsupported policy checkpoint");
    }
    TrainablePolicy pol;
    pol.n_nodes_ = j.at("n_nodes").get<std::size_t>();
    const auto& g = j.at("grid");
    const double lo = g.at("lo").get<double>();
    const double hi = g.at("hi").get<double>();
    const auto bins = g.at("bins").get<std::size_t>();
    pol.grid_ = bins > 1 ? ValueGrid({lo, hi}, (hi - lo) / static_cast<double>(bins - 1)) : ValueGrid({lo, lo});
    const auto& t = j.at("tensors");
    const auto w1_shape = t.at("policy.w1").at("shape").get<std::vector<std::size_t>>();
    if (w1_shape.size() != 2) throw Error(Errc::ParseError, "policy.w1 shape");
    const std::size_t h = w1_shape[0];
    const std::size_t in = w1_shape[1];
    pol.net_ = TwoLayerNet(in, h, pol.n_nodes_ + pol.grid_.size());
    const std::size_t out = pol.net_.output_dim();
    auto dst = pol.net_.params().begin();
    for (const auto& [key, n] : {std::pair{"policy.w1", h * in}, {"policy.b1", h}, {"policy.w2", out * h}, {"policy.b2", out}}) {
      const auto p = read_tensor(t.at(key), n);
      dst = std::copy(p.begin(), p.end(), dst);
    }
    const std::size_t count = pol.net_.param_count();
    pol.adam_ = Adam(count, {});
    pol.adam_.restore(read_tensor(t.at("policy.adam_m"), count), read_tensor(t.at("policy.adam_v"), count),
                      j.at("adam_steps").get<long>());
    return pol;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
}

// --- baselines ----------------------------------------------------------------

std::vector<Candidate> propose_random(std::size_t n_nodes, Interval range, std::size_t k, Rng& rng) {
  if (n_nodes == 0) throw Error(Errc::InvalidArgument, "no nodes");
  double lp = -std::log(static_cast<double>(n_nodes));
  if (range.width() > 0.0) lp -= std::log(range.width());
  std::vector<Candidate> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t node = uniform_index(rng, n_nodes);
    const double value = range.width() > 0.0 ? uniform(rng, range.lo, range.hi) : range.lo;
    out.push_back({{node, value}, lp, std::nullopt});
  }
  return out;
}

Candidate propose_round_robin(std::size_t t, std::size_t n_nodes, const std::vector<double>& value_schedule) {
  if (n_nodes == 0 || value_schedule.empty()) throw Error(Errc::InvalidArgument, "round robin");
  const double value = value_schedule[(t / n_nodes) % value_schedule.size()];
  return {{t % n_nodes, value}, 0.0, std::nullopt};
}

std::vector<double> integer_grid(Interval range) {
  std::vector<double> g;
  for (double v = std::ceil(range.lo); v <= range.hi; v += 1.0) g.push_back(v);
  return g;
}

double children_sum_variance(const MechanismLearner& learner, const Intervention& iv, std::size_t passes, Rng& rng) {
  if (passes < 2) throw Error(Errc::InvalidArgument, "MC dropout needs at least two passes");
  const auto& g = learner.graph();
  const auto& children = g.children(iv.node);
  if (children.empty()) return 0.0;
  const auto state = learner.mean_state(iv);
  const bool stochastic = learner.config().dropout > 0.0;
  std::vector<double> sums(passes, 0.0);
  std::vector<double> par;
  for (std::size_t c : children) {
    par.clear();
    for (std::size_t p : g.parents(c)) par.push_back(state[p]);
    for (auto& s : sums) s += learner.predict(c, par, stochastic, &rng);
  }
  // Shifted by the first draw so identical draws give exactly zero.
  const double shift = sums[0];
  double mean = 0.0;
  for (double s : sums) mean += s - shift;
  mean /= static_cast<double>(passes);
  double var = 0.0;
  for (double s : sums) var += (s - shift - mean) * (s - shift - mean);
  return var / static_cast<double>(passes - 1);
}

namespace {

Candidate argmax_cell(const std::vector<double>& var, const std::vector<double>& grid) {
  std::size_t best = 0;
  // Cells are in (node, value) order, so a strict comparison keeps the lowest node, then value.
  for (std::size_t c = 1; c < var.size(); ++c) {
    if (var[c] > var[best]) best = c;
  }
  return {{best / grid.size(), grid[best % grid.size()]}, 0.0, std::nullopt};
}

void check_maxvar(const MechanismLearner& learner, const std::vector<double>& grid) {
  if (grid.empty()) throw Error(Errc::InvalidArgument, "empty value grid");
  const auto& g = learner.graph();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.is_root(i)) return;
  }
  throw Error(Errc::InvalidArgument, "max-variance needs a non-root node");
}

}  // namespace

Candidate propose_max_variance(const MechanismLearner& learner, const std::vector<double>& grid, std::size_t passes,
                               std::uint64_t seed) {
  check_maxvar(learner, grid);
  const std::size_t cells = learner.graph().size() * grid.size();
  std::vector<double> var(cells, 0.0);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(cells); ++c) {
    const auto cell = static_cast<std::size_t>(c);
    Rng rng = make_stream(seed, cell);
    var[cell] = children_sum_variance(learner, {cell / grid.size(), grid[cell % grid.size()]}, passes, rng);
  }
  return argmax_cell(var, grid);
}

Candidate propose_max_variance_serial(const MechanismLearner& learner, const std::vector<double>& grid,
                                      std::size_t passes, std::uint64_t seed) {
  check_maxvar(learner, grid);
  const std::size_t cells = learner.graph().size() * grid.size();
  std::vector<double> var(cells, 0.0);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    Rng rng = make_stream(seed, cell);
    var[cell] = children_sum_variance(learner, {cell / grid.size(), grid[cell % grid.size()]}, passes, rng);
  }
  return argmax_cell(var, grid);
}

}  // namespace intervene

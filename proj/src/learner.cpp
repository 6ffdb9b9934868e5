#include "intervene/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "intervene/error.hpp"

namespace intervene {

std::size_t ValidationSet::rows() const {
  std::size_t n = 0;
  for (const auto& p : parts) n += p.rows();
  return n;
}

bool Learner::ledger_initialized() const {
  const auto& l = ledger();
  return !l.empty() && std::all_of(l.begin(), l.end(), [](double v) { return std::isfinite(v); });
}

double Learner::total_loss() const {
  double s = 0.0;
  for (double v : ledger()) s += v;
  return s;
}

double gaussian_nll(double mu, double log_sigma, std::span<const double> values) {
  const double inv_var = std::exp(-2.0 * log_sigma);
  double acc = 0.0;
  for (double x : values) acc += 0.5 * std::log(2.0 * std::numbers::pi) + log_sigma + 0.5 * (x - mu) * (x - mu) * inv_var;
  return acc / static_cast<double>(values.size());
}

namespace {

std::ptrdiff_t intervened_of(const Dataset& d) {
  return d.provenance() ? static_cast<std::ptrdiff_t>(d.provenance()->node) : -1;
}

}  // namespace

MechanismLearner::MechanismLearner(std::shared_ptr<const CausalGraph> graph, const LearnerConfig& cfg, Rng& rng)
    : graph_(std::move(graph)), cfg_(cfg) {
  const auto& g = *graph_;
  models_.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto& m = models_[i];
    m.root = g.is_root(i) && cfg_.root_learner;
    if (m.root) {
      m.root_params = {0.0, 0.0};
      m.adam = Adam(2, cfg_.adam);
    } else {
      m.net = TwoLayerNet(g.parents(i).size(), cfg_.hidden, 1);
      m.net.init_uniform(rng);
      m.adam = Adam(m.net.param_count(), cfg_.adam);
    }
  }
  auto buf = std::make_shared<ReplayBuffer>();
  buf->width = g.size();
  buffer_ = std::move(buf);
  ledger_.assign(g.size(), std::numeric_limits<double>::infinity());
}

bool MechanismLearner::has_root_model(std::size_t node) const { return models_.at(node).root; }

std::span<double> MechanismLearner::node_params(std::size_t node) {
  auto& m = models_.at(node);
  return m.root ? std::span<double>(m.root_params) : m.net.params();
}

std::span<const double> MechanismLearner::node_params(std::size_t node) const {
  const auto& m = models_.at(node);
  return m.root ? std::span<const double>(m.root_params) : m.net.params();
}

const TwoLayerNet& MechanismLearner::network(std::size_t node) const {
  if (models_.at(node).root) throw Error(Errc::RootHasNoPredictor, graph_->name(node));
  return models_[node].net;
}

const Adam& MechanismLearner::optimizer(std::size_t node) const { return models_.at(node).adam; }

double MechanismLearner::root_mean(std::size_t node) const {
  if (!models_.at(node).root) throw Error(Errc::InvalidArgument, graph_->name(node) + " has no root model");
  return models_[node].root_params[0];
}

double MechanismLearner::root_std(std::size_t node) const {
  if (!models_.at(node).root) throw Error(Errc::InvalidArgument, graph_->name(node) + " has no root model");
  return std::exp(models_[node].root_params[1]);
}

double MechanismLearner::predict(std::size_t node, std::span<const double> parent_values, bool stochastic,
                                 Rng* rng) const {
  const auto& m = models_.at(node);
  if (m.root) throw Error(Errc::RootHasNoPredictor, graph_->name(node));
  if (parent_values.size() != m.net.input_dim()) throw Error(Errc::LengthMismatch, "parent value count");
  double out = 0.0;
  const double p = stochastic ? cfg_.dropout : 0.0;
  if (p > 0.0 && rng == nullptr) throw Error(Errc::InvalidArgument, "stochastic prediction needs an rng");
  m.net.forward(parent_values, {&out, 1}, nullptr, p, rng);
  return out;
}

double MechanismLearner::node_loss(std::size_t node, const std::vector<const double*>& rows,
                                   std::vector<double>* grad) const {
  const auto& m = models_[node];
  const double n = static_cast<double>(rows.size());
  if (m.root) {
    const double mu = m.root_params[0];
    const double ls = m.root_params[1];
    const double inv_var = std::exp(-2.0 * ls);
    double loss = 0.0;
    double d_mu = 0.0;
    double d_ls = 0.0;
    for (const double* r : rows) {
      const double z = r[node] - mu;
      loss += 0.5 * std::log(2.0 * std::numbers::pi) + ls + 0.5 * z * z * inv_var;
      d_mu += -z * inv_var;
      d_ls += 1.0 - z * z * inv_var;
    }
    if (grad) {
      grad->assign(2, 0.0);
      (*grad)[0] = d_mu / n;
      (*grad)[1] = d_ls / n;
    }
    return loss / n;
  }

  const auto& parents = graph_->parents(node);
  std::vector<double> x(parents.size());
  TwoLayerNet::Cache cache;
  if (grad) grad->assign(m.net.param_count(), 0.0);
  double loss = 0.0;
  for (const double* r : rows) {
    for (std::size_t k = 0; k < parents.size(); ++k) x[k] = r[parents[k]];
    double y_hat = 0.0;
    m.net.forward(x, {&y_hat, 1}, grad ? &cache : nullptr);
    const double diff = y_hat - r[node];
    loss += diff * diff;
    if (grad) {
      const double d_out = 2.0 * diff / n;
      m.net.backward(cache, {&d_out, 1}, *grad);
    }
  }
  return loss / n;
}

void MechanismLearner::step_node(std::size_t node, const std::vector<const double*>& rows, double lr) {
  std::vector<double> grad;
  node_loss(node, rows, &grad);
  models_[node].adam.step(node_params(node), grad, lr);
}

namespace {

struct RowMajor {
  std::vector<double> values;
  std::vector<const double*> ptrs;
};

RowMajor to_row_major(const Dataset& d) {
  RowMajor rm;
  rm.values.resize(d.rows() * d.cols());
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < d.cols(); ++c) rm.values[r * d.cols() + c] = d.at(r, c);
  }
  for (std::size_t r = 0; r < d.rows(); ++r) rm.ptrs.push_back(rm.values.data() + r * d.cols());
  return rm;
}

}  // namespace

double MechanismLearner::loss_and_gradient(std::size_t node, const Dataset& batch, std::vector<double>& grad) const {
  if (batch.empty()) throw Error(Errc::EmptyBatch, "no rows");
  if (batch.cols() != graph_->size()) throw Error(Errc::LengthMismatch, "batch width");
  const bool excluded = intervened_of(batch) == static_cast<std::ptrdiff_t>(node) &&
                        (models_[node].root || !graph_->is_root(node));
  if (excluded) {
    grad.assign(node_params(node).size(), 0.0);
    return 0.0;
  }
  const auto rm = to_row_major(batch);
  return node_loss(node, rm.ptrs, &grad);
}

double MechanismLearner::train_step(std::size_t node, const Dataset& batch, double lr) {
  std::vector<double> grad;
  const bool excluded = !batch.empty() && intervened_of(batch) == static_cast<std::ptrdiff_t>(node) &&
                        (models_.at(node).root || !graph_->is_root(node));
  const double loss = loss_and_gradient(node, batch, grad);
  if (!excluded) models_[node].adam.step(node_params(node), grad, lr);
  return loss;
}

double MechanismLearner::mc_dropout_variance(std::size_t node, std::span<const double> parent_values,
                                             std::size_t passes, Rng& rng) const {
  if (passes < 2) throw Error(Errc::InvalidArgument, "MC dropout needs at least two passes");
  if (models_.at(node).root) throw Error(Errc::RootHasNoPredictor, graph_->name(node));
  std::vector<double> draws(passes);
  for (auto& d : draws) d = predict(node, parent_values, cfg_.dropout > 0.0, &rng);
  // Shifted by the first draw so identical draws give exactly zero.
  const double shift = draws[0];
  double mean = 0.0;
  for (double d : draws) mean += d - shift;
  mean /= static_cast<double>(passes);
  double var = 0.0;
  for (double d : draws) var += (d - shift - mean) * (d - shift - mean);
  return var / static_cast<double>(passes - 1);
}

std::vector<double> MechanismLearner::mean_state(const std::optional<Intervention>& intervention) const {
  const auto& g = *graph_;
  std::vector<double> row(g.size(), 0.0);
  std::vector<double> par;
  for (std::size_t v : g.topological_order()) {
    if (intervention && intervention->node == v) {
      row[v] = intervention->value;
    } else if (models_[v].root) {
      row[v] = models_[v].root_params[0];
    } else {
      par.clear();
      for (std::size_t p : g.parents(v)) par.push_back(row[p]);
      row[v] = predict(v, par);
    }
  }
  return row;
}

std::unique_ptr<Learner> MechanismLearner::clone() const { return std::make_unique<MechanismLearner>(*this); }

void MechanismLearner::observe(const Dataset& data) {
  if (data.cols() != graph_->size()) throw Error(Errc::LengthMismatch, "dataset width");
  auto next = std::make_shared<ReplayBuffer>(*buffer_);
  const auto iv = intervened_of(data);
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t c = 0; c < data.cols(); ++c) next->values.push_back(data.at(r, c));
    next->intervened.push_back(iv);
  }
  buffer_ = std::move(next);
}

void MechanismLearner::fit_episode(Rng& rng) {
  const auto& buf = *buffer_;
  if (buf.rows() == 0) return;
  const std::size_t window = std::min(cfg_.window, buf.rows());
  const std::size_t first = buf.rows() - window;
  std::vector<std::size_t> picks(cfg_.batch_size);
  std::vector<const double*> rows;
  for (std::size_t step = 0; step < cfg_.steps_per_episode; ++step) {
    for (auto& p : picks) p = first + uniform_index(rng, window);
    for (std::size_t node = 0; node < graph_->size(); ++node) {
      const bool filter = models_[node].root || !graph_->is_root(node);
      rows.clear();
      for (std::size_t p : picks) {
        if (!filter || buf.intervened[p] != static_cast<std::ptrdiff_t>(node)) rows.push_back(buf.row(p).data());
      }
      if (!rows.empty()) step_node(node, rows, cfg_.lr);
    }
  }
}

void MechanismLearner::fit_probe(const Dataset& probe, std::size_t steps, double lr, std::size_t replay_rows,
                                 Rng& rng) {
  if (probe.empty()) return;
  const auto rm = to_row_major(probe);
  const auto iv = intervened_of(probe);
  const auto& buf = *buffer_;
  const std::size_t window = std::min(cfg_.window, buf.rows());
  const std::size_t first = buf.rows() - window;
  const std::size_t replay = window ? replay_rows : 0;
  std::vector<std::size_t> picks(replay);
  std::vector<const double*> rows;
  for (std::size_t step = 0; step < steps; ++step) {
    for (auto& p : picks) p = first + uniform_index(rng, window);
    for (std::size_t node = 0; node < graph_->size(); ++node) {
      const bool filter = models_[node].root || !graph_->is_root(node);
      const auto self = static_cast<std::ptrdiff_t>(node);
      rows.clear();
      if (!filter || iv != self) rows = rm.ptrs;
      for (std::size_t p : picks) {
        if (!filter || buf.intervened[p] != self) rows.push_back(buf.row(p).data());
      }
      if (!rows.empty()) step_node(node, rows, lr);
    }
  }
}

double MechanismLearner::node_validation_loss(std::size_t node, const ValidationSet& val) const {
  const auto& m = models_[node];
  const bool filter = m.root || !graph_->is_root(node);
  if (m.root) {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t n = 0;
    for (const auto& part : val.parts) {
      if (filter && intervened_of(part) == static_cast<std::ptrdiff_t>(node)) continue;
      for (double v : part.column(node)) {
        sum += v;
        sum_sq += v * v;
        ++n;
      }
    }
    if (n == 0) return 0.0;
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
    const double dm = m.root_params[0] - mean;
    const double ds = std::exp(m.root_params[1]) - std::sqrt(var);
    return dm * dm + ds * ds;
  }
  const auto& parents = graph_->parents(node);
  std::vector<double> x(parents.size());
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& part : val.parts) {
    if (filter && intervened_of(part) == static_cast<std::ptrdiff_t>(node)) continue;
    for (std::size_t r = 0; r < part.rows(); ++r) {
      for (std::size_t k = 0; k < parents.size(); ++k) x[k] = part.at(r, parents[k]);
      double y_hat = 0.0;
      m.net.forward(x, {&y_hat, 1});
      const double diff = y_hat - part.at(r, node);
      acc += diff * diff;
      ++n;
    }
  }
  return n == 0 ? 0.0 : acc / static_cast<double>(n);
}

std::vector<double> MechanismLearner::validation_losses(const ValidationSet& val) const {
  if (val.rows() == 0) throw Error(Errc::InvalidArgument, "empty validation set");
  const auto n = static_cast<std::ptrdiff_t>(graph_->size());
  std::vector<double> out(graph_->size());
#pragma omp parallel for schedule(dynamic, 1) if (val.rows() * graph_->size() > 2048)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = node_validation_loss(static_cast<std::size_t>(i), val);
  return out;
}

std::vector<double> MechanismLearner::validation_losses_serial(const ValidationSet& val) const {
  if (val.rows() == 0) throw Error(Errc::InvalidArgument, "empty validation set");
  std::vector<double> out(graph_->size());
  for (std::size_t i = 0; i < graph_->size(); ++i) out[i] = node_validation_loss(i, val);
  return out;
}

const std::vector<double>& MechanismLearner::evaluate(const ValidationSet& val) {
  ledger_ = validation_losses(val);
  return ledger_;
}

std::optional<Dataset> MechanismLearner::simulate(const Intervention& iv, std::size_t n, Rng& rng) const {
  const auto& g = *graph_;
  Dataset out(n, g.size(), iv);
  std::vector<double> row(g.size());
  std::vector<double> par;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t v : g.topological_order()) {
      if (iv.node == v) {
        row[v] = iv.value;
      } else if (models_[v].root) {
        row[v] = models_[v].root_params[0] + std::exp(models_[v].root_params[1]) * standard_normal(rng);
      } else {
        par.clear();
        for (std::size_t p : g.parents(v)) par.push_back(row[p]);
        row[v] = predict(v, par);
      }
    }
    for (std::size_t c = 0; c < g.size(); ++c) out.at(r, c) = row[c];
  }
  return out;
}

namespace {

nlohmann::json tensor(std::span<const double> data) {
  return {{"shape", {data.size()}}, {"data", std::vector<double>(data.begin(), data.end())}};
}

std::vector<double> read_tensor(const nlohmann::json& t, std::size_t expected) {
  auto data = t.at("data").get<std::vector<double>>();
  const auto shape = t.at("shape").get<std::vector<std::size_t>>();
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  if (n != data.size() || data.size() != expected) throw Error(Errc::ParseError, "tensor shape mismatch");
  return data;
}

}  // namespace

nlohmann::json MechanismLearner::to_json() const {
  nlohmann::json j;
  j["format"] = "intervene-tensor-map";
  j["version"] = 1;
  j["graph"] = graph_->names();
  j["config"] = {{"hidden", cfg_.hidden}, {"root_learner", cfg_.root_learner}};
  for (std::size_t i = 0; i < graph_->size(); ++i) {
    const auto& name = graph_->name(i);
    const auto& m = models_[i];
    auto& t = j["tensors"];
    if (m.root) {
      t[name + ".root"] = tensor(m.root_params);
    } else {
      const auto p = m.net.params();
      const std::size_t h = m.net.hidden_dim();
      const std::size_t in = m.net.input_dim();
      auto slice = [&](std::size_t from, std::size_t n) { return std::vector<double>(p.begin() + from, p.begin() + from + n); };
      t[name + ".w1"] = {{"shape", {h, in}}, {"data", slice(0, h * in)}};
      t[name + ".b1"] = {{"shape", {h}}, {"data", slice(h * in, h)}};
      t[name + ".w2"] = {{"shape", {1, h}}, {"data", slice(h * in + h, h)}};
      t[name + ".b2"] = {{"shape", {1}}, {"data", slice(h * in + 2 * h, 1)}};
    }
    t[name + ".adam_m"] = tensor(m.adam.first_moment());
    t[name + ".adam_v"] = tensor(m.adam.second_moment());
    j["adam_steps"][name] = m.adam.steps_taken();
  }
  j["ledger"] = nlohmann::json::array();
  for (double v : ledger_) j["ledger"].push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
  return j;
}

MechanismLearner MechanismLearner::from_json(const nlohmann::json& j, std::shared_ptr<const CausalGraph> graph) {
  try {
    if (j.at("format") != "intervene-tensor-map" || j.at("version") != 1) {
      throw Error(Errc::ParseError, "unsupported checkpoint format");
    }
    if (j.at("graph").get<std::vector<std::string>>() != graph->names()) {
      throw Error(Errc::ParseError, "checkpoint graph does not match");
    }
    MechanismLearner l;
    l.graph_ = graph;
    l.cfg_.hidden = j.at("config").at("hidden").get<std::size_t>();
    l.cfg_.root_learner = j.at("config").at("root_learner").get<bool>();
    l.models_.resize(graph->size());
    const auto& t = j.at("tensors");
    for (std::size_t i = 0; i < graph->size(); ++i) {
      const auto& name = graph->name(i);
      auto& m = l.models_[i];
      m.root = graph->is_root(i) && l.cfg_.root_learner;
      std::size_t count = 2;
      if (m.root) {
        m.root_params = read_tensor(t.at(name + ".root"), 2);
      } else {
        m.net = TwoLayerNet(graph->parents(i).size(), l.cfg_.hidden, 1);
        count = m.net.param_count();
        const std::size_t h = m.net.hidden_dim();
        const std::size_t in = m.net.input_dim();
        auto out = m.net.params().begin();
        for (const auto& [key, n] : {std::pair{".w1", h * in}, {".b1", h}, {".w2", h}, {".b2", std::size_t{1}}}) {
          const auto p = read_tensor(t.at(name + key), n);
          out = std::copy(p.begin(), p.end(), out);
        }
      }
      m.adam = Adam(count, l.cfg_.adam);
      m.adam.restore(read_tensor(t.at(name + ".adam_m"), count), read_tensor(t.at(name + ".adam_v"), count),
                     j.at("adam_steps").at(name).get<long>());
    }
    auto buf = std::make_shared<ReplayBuffer>();
    buf->width = graph->size();
    l.buffer_ = std::move(buf);
    for (const auto& v : j.at("ledger")) {
      l.ledger_.push_back(v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>());
    }
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
}

bool operator==(const MechanismLearner& a, const MechanismLearner& b) {
  if (a.models_.size() != b.models_.size() || a.ledger_ != b.ledger_) return false;
  for (std::size_t i = 0; i < a.models_.size(); ++i) {
    const auto& x = a.models_[i];
    const auto& y = b.models_[i];
    if (x.root != y.root || !(x.net == y.net) || x.root_params != y.root_params || !(x.adam == y.adam)) return false;
  }
  return true;
}

}  // namespace intervene

#include "intervene/scm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "intervene/error.hpp"

namespace intervene {

namespace {

double apply_term(const AnalyticTerm& t, double x) {
  switch (t.kind) {
    case AnalyticTerm::Kind::Identity: return t.weight * x;
    case AnalyticTerm::Kind::Sine: return t.weight * std::sin(x);
    case AnalyticTerm::Kind::Square: return t.weight * x * x;
  }
  return 0.0;
}

std::size_t arity(const Mechanism& m) {
  if (const auto* lin = std::get_if<LinearForm>(&m.form)) return lin->weights.size();
  return 0;
}

}  // namespace

double Mechanism::evaluate(std::span<const double> parent_values) const {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, LinearForm>) {
          double acc = f.intercept;
          for (std::size_t i = 0; i < f.weights.size(); ++i) acc += f.weights[i] * parent_values[i];
          return acc;
        } else if constexpr (std::is_same_v<T, AnalyticForm>) {
          double acc = f.bias;
          for (const auto& t : f.terms) acc += apply_term(t, parent_values[t.parent_slot]);
          return acc;
        } else {
          return f.mean;
        }
      },
      form);
}

OracleScm::OracleScm(CausalGraph graph, std::vector<Mechanism> mechanisms, Interval range)
    : graph_(std::move(graph)), mechanisms_(std::move(mechanisms)), range_(range) {
  if (mechanisms_.size() != graph_.size()) {
    throw Error(Errc::InvalidArgument, "one mechanism per node required");
  }
  if (!(range_.lo < range_.hi)) throw Error(Errc::InvalidArgument, "empty intervention range");
  for (std::size_t i = 0; i < graph_.size(); ++i) {
    const auto& m = mechanisms_[i];
    const std::size_t n_par = graph_.parents(i).size();
    if (m.noise_std < 0.0) throw Error(Errc::InvalidArgument, "negative noise_std on " + graph_.name(i));
    if (m.is_root() != (n_par == 0)) {
      throw Error(Errc::InvalidArgument, "root mechanism must sit exactly on root nodes: " + graph_.name(i));
    }
    if (const auto* root = std::get_if<RootForm>(&m.form); root && !(root->std > 0.0)) {
      throw Error(Errc::InvalidArgument, "root std must be positive on " + graph_.name(i));
    }
    if (const auto* lin = std::get_if<LinearForm>(&m.form); lin && lin->weights.size() != n_par) {
      throw Error(Errc::InvalidArgument, "linear weight count != parent count on " + graph_.name(i));
    }
    if (const auto* an = std::get_if<AnalyticForm>(&m.form)) {
      for (const auto& t : an->terms) {
        if (t.parent_slot >= n_par) throw Error(Errc::InvalidArgument, "term parent slot out of range");
      }
    }
  }
}

OracleScm OracleScm::without_noise() const {
  auto mechs = mechanisms_;
  for (auto& m : mechs) {
    if (!m.is_root()) m.noise_std = 0.0;
  }
  return OracleScm(graph_, std::move(mechs), range_);
}

Dataset sample(const OracleScm& scm, const std::optional<Intervention>& intervention, std::size_t n, Rng& rng) {
  const auto& g = scm.graph();
  if (n == 0) throw Error(Errc::InvalidArgument, "sample count must be positive");
  if (intervention) {
    if (intervention->node >= g.size()) throw Error(Errc::InvalidIndex, "intervention node out of range");
    if (!scm.range().contains(intervention->value)) {
      throw Error(Errc::ValueOutOfRange, "intervention value " + format_double(intervention->value));
    }
  }
  Dataset out(n, g.size(), intervention);
  std::vector<double> row(g.size());
  std::vector<double> par;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t v : g.topological_order()) {
      if (intervention && intervention->node == v) {
        row[v] = intervention->value;
        continue;
      }
      const auto& m = scm.mechanism(v);
      if (const auto* root = std::get_if<RootForm>(&m.form)) {
        row[v] = root->mean + root->std * standard_normal(rng);
        continue;
      }
      par.clear();
      for (std::size_t p : g.parents(v)) par.push_back(row[p]);
      row[v] = m.evaluate(par) + m.noise_std * standard_normal(rng);
    }
    for (std::size_t c = 0; c < g.size(); ++c) out.at(r, c) = row[c];
  }
  return out;
}

std::vector<double> evaluate_noiseless(const OracleScm& scm, const std::optional<Intervention>& intervention,
                                       std::span<const double> root_values) {
  const auto& g = scm.graph();
  if (root_values.size() != g.roots().size()) throw Error(Errc::LengthMismatch, "one value per root");
  std::vector<double> row(g.size());
  for (std::size_t k = 0; k < g.roots().size(); ++k) row[g.roots()[k]] = root_values[k];
  std::vector<double> par;
  for (std::size_t v : g.topological_order()) {
    if (intervention && intervention->node == v) {
      row[v] = intervention->value;
      continue;
    }
    if (g.is_root(v)) continue;
    par.clear();
    for (std::size_t p : g.parents(v)) par.push_back(row[p]);
    row[v] = scm.mechanism(v).evaluate(par);
  }
  return row;
}

OracleScm build_benchmark_5node() {
  auto graph = CausalGraph::create({"X1", "X2", "X3", "X4", "X5"}, {{0, 1}, {0, 2}, {1, 2}, {3, 4}});
  constexpr double kNoise = 0.01;
  using K = AnalyticTerm::Kind;
  std::vector<Mechanism> m(5);
  m[0] = {RootForm{0.0, 1.0}, 0.0};
  m[1] = {LinearForm{{2.0}, 1.0}, kNoise};
  // X3 parents in edge order: (X1, X2).
  m[2] = {AnalyticForm{{{K::Identity, 0, 0.5}, {K::Identity, 1, -1.0}, {K::Sine, 1, 1.0}}, 0.0}, kNoise};
  m[3] = {RootForm{2.0, 1.0}, 0.0};
  m[4] = {AnalyticForm{{{K::Square, 0, 0.2}}, 0.0}, kNoise};
  return OracleScm(std::move(graph), std::move(m));
}

OracleScm build_benchmark_15node() {
  // Node order: roots, then colliders layer by layer.
  std::vector<std::string> names{"R1", "R2", "R3", "R4", "A", "C1", "B", "C2",
                                 "D",  "C3", "E",  "F",  "C4", "C5", "C6"};
  auto idx = [&](const char* s) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == s) return i;
    }
    throw Error(Errc::InvalidIndex, s);
  };
  // Each collider lists (first parent, second parent).
  const std::array<std::array<const char*, 3>, 11> colliders{{
      {"A", "R1", "R2"},
      {"C1", "R2", "R3"},
      {"B", "R3", "R4"},
      {"C2", "R1", "A"},
      {"D", "A", "C1"},
      {"C3", "C1", "B"},
      {"E", "B", "R4"},
      {"F", "C2", "D"},
      {"C4", "D", "C3"},
      {"C5", "C3", "E"},
      {"C6", "E", "C5"},
  }};
  // Frozen draws from U([-2,2] \ [-0.3,0.3]): (w1, w2, b) per collider.
  constexpr std::array<std::array<double, 3>, 11> kWeights{{
      {0.7033, -1.1427, -0.7622},
      {1.1979, 1.9832, -1.4311},
      {-1.6851, -1.2767, -0.5614},
      {-1.3215, 0.355, 0.4672},
      {-1.5785, -1.9815, 1.9025},
      {1.1977, 0.3873, -0.6986},
      {-1.1746, -0.8878, 1.4998},
      {-1.1474, -0.903, 1.2287},
      {-0.9265, -0.9277, -1.7165},
      {-0.9432, 1.5558, -0.8547},
      {1.0951, 1.8597, 1.5929},
  }};
  std::vector<Edge> edges;
  for (const auto& c : colliders) {
    edges.emplace_back(idx(c[1]), idx(c[0]));
    edges.emplace_back(idx(c[2]), idx(c[0]));
  }
  auto graph = CausalGraph::create(names, edges);

  constexpr double kNoise = 0.01;
  using K = AnalyticTerm::Kind;
  std::vector<Mechanism> m(names.size());
  for (std::size_t r = 0; r < 4; ++r) m[r] = {RootForm{0.0, 1.0}, 0.0};
  for (std::size_t k = 0; k < colliders.size(); ++k) {
    const auto& w = kWeights[k];
    Mechanism mech;
    mech.noise_std = kNoise;
    switch (k % 3) {
      case 0: mech.form = LinearForm{{w[0], w[1]}, w[2]}; break;
      case 1: mech.form = AnalyticForm{{{K::Identity, 0, w[0]}, {K::Sine, 1, 1.0}}, 0.0}; break;
      default: mech.form = AnalyticForm{{{K::Identity, 0, w[0]}, {K::Square, 1, 0.2}}, 0.0}; break;
    }
    m[idx(colliders[k][0])] = mech;
  }
  return OracleScm(std::move(graph), std::move(m));
}

namespace {

AnalyticTerm::Kind kind_from_string(const std::string& s) {
  if (s == "identity" || s == "linear") return AnalyticTerm::Kind::Identity;
  if (s == "sin") return AnalyticTerm::Kind::Sine;
  if (s == "square") return AnalyticTerm::Kind::Square;
  throw Error(Errc::ParseError, "unknown analytic term kind '" + s + "'");
}

const char* kind_to_string(AnalyticTerm::Kind k) {
  switch (k) {
    case AnalyticTerm::Kind::Identity: return "identity";
    case AnalyticTerm::Kind::Sine: return "sin";
    case AnalyticTerm::Kind::Square: return "square";
  }
  return "identity";
}

}  // namespace

OracleScm scm_from_json(const nlohmann::json& j) {
  try {
    const auto names = j.at("nodes").get<std::vector<std::string>>();
    std::vector<Edge> edges;
    auto find = [&](const std::string& n) {
      for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == n) return i;
      }
      throw Error(Errc::InvalidIndex, "unknown node '" + n + "' in edge list");
    };
    for (const auto& e : j.at("edges")) edges.emplace_back(find(e.at(0).get<std::string>()), find(e.at(1).get<std::string>()));
    auto graph = CausalGraph::create(names, edges);

    Interval range;
    if (j.contains("range")) range = {j["range"].at(0).get<double>(), j["range"].at(1).get<double>()};

    std::vector<Mechanism> mechs(names.size());
    const auto& mj = j.at("mechanisms");
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto& spec = mj.at(names[i]);
      const auto type = spec.at("type").get<std::string>();
      Mechanism m;
      m.noise_std = spec.value("noise_std", 0.0);
      if (type == "root") {
        m.form = RootForm{spec.value("mean", 0.0), spec.value("std", 1.0)};
      } else if (type == "linear") {
        m.form = LinearForm{spec.at("weights").get<std::vector<double>>(), spec.value("intercept", 0.0)};
      } else if (type == "analytic") {
        AnalyticForm f;
        f.bias = spec.value("bias", 0.0);
        const auto& parents = graph.parents(i);
        for (const auto& t : spec.at("terms")) {
          const std::size_t p = find(t.at("parent").get<std::string>());
          auto slot = std::find(parents.begin(), parents.end(), p);
          if (slot == parents.end()) {
            throw Error(Errc::InvalidArgument, names[p] + " is not a parent of " + names[i]);
          }
          f.terms.push_back({kind_from_string(t.at("kind").get<std::string>()),
                             static_cast<std::size_t>(slot - parents.begin()), t.value("weight", 1.0)});
        }
        m.form = std::move(f);
      } else {
        throw Error(Errc::ParseError, "unknown mechanism type '" + type + "'");
      }
      mechs[i] = std::move(m);
    }
    return OracleScm(std::move(graph), std::move(mechs), range);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
}

nlohmann::json scm_to_json(const OracleScm& scm) {
  const auto& g = scm.graph();
  nlohmann::json j;
  j["nodes"] = g.names();
  j["edges"] = nlohmann::json::array();
  for (const auto& [p, c] : g.edges()) j["edges"].push_back({g.name(p), g.name(c)});
  j["range"] = {scm.range().lo, scm.range().hi};
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& m = scm.mechanism(i);
    nlohmann::json s;
    std::visit(
        [&](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, RootForm>) {
            s = {{"type", "root"}, {"mean", f.mean}, {"std", f.std}};
          } else if constexpr (std::is_same_v<T, LinearForm>) {
            s = {{"type", "linear"}, {"weights", f.weights}, {"intercept", f.intercept}};
          } else {
            s = {{"type", "analytic"}, {"bias", f.bias}, {"terms", nlohmann::json::array()}};
            for (const auto& t : f.terms) {
              s["terms"].push_back({{"kind", kind_to_string(t.kind)},
                                    {"parent", g.name(g.parents(i)[t.parent_slot])},
                                    {"weight", t.weight}});
            }
          }
        },
        m.form);
    s["noise_std"] = m.noise_std;
    j["mechanisms"][g.name(i)] = s;
  }
  return j;
}

OracleScm load_scm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, path.string() + ": " + e.what());
  }
  return scm_from_json(j);
}

}  // namespace intervene

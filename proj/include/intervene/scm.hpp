#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "intervene/dataset.hpp"
#include "intervene/graph.hpp"
#include "intervene/rng.hpp"

namespace intervene {

struct LinearForm {
  std::vector<double> weights;  // one per parent, parent-list order
  double intercept = 0.0;
};

/// A term of the closed analytic algebra: weight * g(parent) with g one of
/// identity, sin, square.
struct AnalyticTerm {
  enum class Kind { Identity, Sine, Square };
  Kind kind = Kind::Identity;
  std::size_t parent_slot = 0;
  double weight = 1.0;
};

struct AnalyticForm {
  std::vector<AnalyticTerm> terms;
  double bias = 0.0;
};

struct RootForm {
  double mean = 0.0;
  double std = 1.0;
};

struct Mechanism {
  std::variant<LinearForm, AnalyticForm, RootForm> form;
  double noise_std = 0.0;

  bool is_root() const { return std::holds_alternative<RootForm>(form); }

  /// Deterministic part f_i(Pa_i). Roots return their mean.
  double evaluate(std::span<const double> parent_values) const;
};

/// Ground-truth SCM. Immutable; sampling is pure given the rng.
class OracleScm {
 public:
  /// Throws Error{InvalidArgument} on arity or parameter violations.
  OracleScm(CausalGraph graph, std::vector<Mechanism> mechanisms, Interval range = {});

  const CausalGraph& graph() const { return graph_; }
  const std::vector<Mechanism>& mechanisms() const { return mechanisms_; }
  const Mechanism& mechanism(std::size_t i) const { return mechanisms_.at(i); }
  const Interval& range() const { return range_; }

  /// Copy with every non-root noise_std set to zero.
  OracleScm without_noise() const;

 private:
  CausalGraph graph_;
  std::vector<Mechanism> mechanisms_;
  Interval range_;
};

/// Draws n rows from P(V) or P(V | do(node = value)). Nodes are visited in
/// topological order per row; the intervened node gets the constant and no
/// noise draw. Throws Error{ValueOutOfRange, InvalidIndex, InvalidArgument}.
Dataset sample(const OracleScm& scm, const std::optional<Intervention>& intervention, std::size_t n,
               Rng& rng);

/// Closed-form evaluation of one row with all noise at zero.
std::vector<double> evaluate_noiseless(const OracleScm& scm, const std::optional<Intervention>& intervention,
                                       std::span<const double> root_values);

OracleScm build_benchmark_5node();
OracleScm build_benchmark_15node();

/// Declarative description:
/// {"nodes": [...], "edges": [["X1","X2"], ...], "range": [-5, 5],
///  "mechanisms": {"X1": {"type": "root", "mean": 0, "std": 1},
///                 "X2": {"type": "linear", "weights": [2], "intercept": 1, "noise_std": 0.01},
///                 "X3": {"type": "analytic", "bias": 0, "noise_std": 0.01,
///                        "terms": [{"kind": "sin", "parent": "X2", "weight": 1}]}}}
OracleScm scm_from_json(const nlohmann::json& j);
nlohmann::json scm_to_json(const OracleScm& scm);
OracleScm load_scm(const std::filesystem::path& path);

}  // namespace intervene

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace intervene {

using Edge = std::pair<std::size_t, std::size_t>;  // (parent, child)

/// Immutable DAG over named nodes. Parent lists keep edge insertion order,
/// which fixes the argument order of every mechanism and predictor.
class CausalGraph {
 public:
  /// Throws Error{CycleDetected | InvalidIndex | SelfLoop | DuplicateEdge}.
  static CausalGraph create(std::vector<std::string> names, const std::vector<Edge>& edges);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  std::size_t index_of(const std::string& name) const;

  const std::vector<std::size_t>& parents(std::size_t i) const { return parents_.at(i); }
  const std::vector<std::size_t>& children(std::size_t i) const { return children_.at(i); }
  const std::vector<std::size_t>& topological_order() const { return order_; }
  const std::vector<std::size_t>& roots() const { return roots_; }
  bool is_root(std::size_t i) const { return parents_.at(i).empty(); }
  const std::vector<Edge>& edges() const { return edges_; }

 private:
  CausalGraph() = default;

  std::vector<std::string> names_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> roots_;
};

/// Unnamed convenience form: nodes are called X1..Xn.
CausalGraph validate_graph(const std::vector<Edge>& edges, std::size_t n_nodes);

/// Transitive closure of children, sorted ascending; excludes `node`.
std::vector<std::size_t> descendants(const CausalGraph& graph, std::size_t node);

}  // namespace intervene

#include "intervene/graph.hpp"

#include <algorithm>
#include <set>

#include "intervene/error.hpp"

namespace intervene {

CausalGraph CausalGraph::create(std::vector<std::string> names, const std::vector<Edge>& edges) {
  const std::size_t n = names.size();
  if (n == 0) throw Error(Errc::InvalidArgument, "graph needs at least one node");

  CausalGraph g;
  g.names_ = std::move(names);
  g.parents_.resize(n);
  g.children_.resize(n);

  std::set<Edge> seen;
  for (const auto& [p, c] : edges) {
    if (p >= n || c >= n) throw Error(Errc::InvalidIndex, "edge endpoint out of range");
    if (p == c) throw Error(Errc::SelfLoop, "self-loop on node " + g.names_[p]);
    if (!seen.insert({p, c}).second) {
      throw Error(Errc::DuplicateEdge, g.names_[p] + " -> " + g.names_[c]);
    }
    g.parents_[c].push_back(p);
    g.children_[p].push_back(c);
    g.edges_.emplace_back(p, c);
  }

  // Kahn's algorithm, always releasing the lowest ready index.
  std::vector<std::size_t> indegree(n);
  for (std::size_t i = 0; i < n; ++i) indegree[i] = g.parents_[i].size();
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.insert(i);
  }
  while (!ready.empty()) {
    const std::size_t v = *ready.begin();
    ready.erase(ready.begin());
    g.order_.push_back(v);
    for (std::size_t c : g.children_[v]) {
      if (--indegree[c] == 0) ready.insert(c);
    }
  }
  if (g.order_.size() != n) throw Error(Errc::CycleDetected, "graph contains a directed cycle");

  for (std::size_t i = 0; i < n; ++i) {
    if (g.parents_[i].empty()) g.roots_.push_back(i);
  }
  return g;
}

std::size_t CausalGraph::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw Error(Errc::InvalidIndex, "unknown node '" + name + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

CausalGraph validate_graph(const std::vector<Edge>& edges, std::size_t n_nodes) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_nodes; ++i) names.push_back("X" + std::to_string(i + 1));
  return CausalGraph::create(std::move(names), edges);
}

std::vector<std::size_t> descendants(const CausalGraph& graph, std::size_t node) {
  if (node >= graph.size()) throw Error(Errc::InvalidIndex, "node out of range");
  std::vector<bool> seen(graph.size(), false);
  std::vector<std::size_t> stack{node};
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t c : graph.children(v)) {
      if (!seen[c]) {
        seen[c] = true;
        stack.push_back(c);
      }
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    if (seen[i] && i != node) out.push_back(i);
  }
  return out;
}

}  // namespace intervene

#include "qg/tree.hpp"

#include <algorithm>
#include <queue>

namespace qg {

TreeGraph TreeGraph::build(const std::vector<Edge>& edges) {
  const int n = static_cast<int>(edges.size());
  if (n == 0) throw TreeError("tree must have at least one edge");

  TreeGraph g;
  g.edges_.resize(n);
  std::vector<bool> seen_edge(n, false);
  for (const Edge& e : edges) {
    if (e.id < 1 || e.id > n) throw TreeError("edge id " + std::to_string(e.id) + " out of range 1.." + std::to_string(n));
    if (seen_edge[e.id - 1]) throw TreeError("duplicate edge id " + std::to_string(e.id));
    if (!(e.length > 0.0)) throw TreeError("nonpositive length on edge " + std::to_string(e.id));
    if (e.parent < 0 || e.parent > n || e.child < 0 || e.child > n)
      throw TreeError("vertex id out of range 0.." + std::to_string(n) + " on edge " + std::to_string(e.id));
    if (e.child == 0) throw TreeError("edge " + std::to_string(e.id) + " points into the root");
    if (e.child == e.parent) throw TreeError("self-loop at vertex " + std::to_string(e.child));
    seen_edge[e.id - 1] = true;
    g.edges_[e.id - 1] = e;
  }

  g.s_initial_.assign(n + 1, {});
  g.s_terminal_.assign(n + 1, {});
  std::vector<int> parent_count(n + 1, 0);
  for (const Edge& e : g.edges_) {
    g.s_initial_[e.parent].push_back(e.id);
    g.s_terminal_[e.child].push_back(e.id);
    if (++parent_count[e.child] > 1)
      throw TreeError("vertex " + std::to_string(e.child) + " has multiple incoming edges (cycle or multi-edge)");
  }
  if (g.s_initial_[0].size() != 1)
    throw TreeError("root must be a boundary vertex with exactly one outgoing edge, has " +
                    std::to_string(g.s_initial_[0].size()));

  // Coordinates by traversal from the root; also checks connectivity.
  g.coord_.assign(n + 1, -1.0);
  g.coord_[0] = 0.0;
  std::queue<int> frontier;
  frontier.push(0);
  int reached = 1;
  while (!frontier.empty()) {
    const int k = frontier.front();
    frontier.pop();
    for (int j : g.s_initial_[k]) {
      const Edge& e = g.edges_[j - 1];
      g.coord_[e.child] = g.coord_[k] + e.length;
      ++reached;
      frontier.push(e.child);
    }
  }
  if (reached != n + 1) {
    for (int k = 0; k <= n; ++k)
      if (g.coord_[k] < 0.0) throw TreeError("vertex " + std::to_string(k) + " unreachable from the root");
  }

  for (auto* sets : {&g.s_initial_, &g.s_terminal_})
    for (auto& v : *sets) std::sort(v.begin(), v.end());

  for (int k = 0; k <= n; ++k)
    (g.is_boundary(k) ? g.boundary_ : g.inner_).push_back(k);
  return g;
}

int TreeGraph::direction_sign(int k, int j) const {
  if (k < 0 || k >= num_vertices()) throw TreeError("unknown vertex id " + std::to_string(k));
  if (j < 1 || j > num_edges()) throw TreeError("unknown edge id " + std::to_string(j));
  if (terminal_vertex(j) == k) return 1;
  if (initial_vertex(j) == k) return -1;
  return 0;
}

std::vector<double> TreeGraph::eta_multipliers() const {
  std::vector<double> eta(num_edges(), 0.0);
  std::queue<int> frontier;
  for (int j : edges_starting_at(0)) {
    eta[j - 1] = 1.0;
    frontier.push(j);
  }
  while (!frontier.empty()) {
    const int j1 = frontier.front();
    frontier.pop();
    const int k = terminal_vertex(j1);
    const double fan = static_cast<double>(edges_starting_at(k).size());
    for (int j2 : edges_starting_at(k)) {
      eta[j2 - 1] = fan * fan * eta[j1 - 1];
      frontier.push(j2);
    }
  }
  return eta;
}

}  // namespace qg

#pragma once

#include <random>

#include "qg/tree.hpp"

namespace qg::testing {

/// The 5-edge example tree: V0 -> V1 -> {V2, V3}, V2 -> {V4, V5}, unit lengths.
inline TreeGraph five_edge_tree() {
  return TreeGraph::build({{1, 0, 1, 1.0},
                           {2, 1, 2, 1.0},
                           {3, 1, 3, 1.0},
                           {4, 2, 4, 1.0},
                           {5, 2, 5, 1.0}});
}

inline TreeGraph single_edge(double length = 1.0) {
  return TreeGraph::build({{1, 0, 1, length}});
}

inline TreeGraph path_tree(int n, double length = 1.0) {
  std::vector<Edge> edges;
  for (int j = 1; j <= n; ++j) edges.push_back({j, j - 1, j, length});
  return TreeGraph::build(edges);
}

/// Random rooted tree with N <= max_edges and lengths in [0.5, 2].
inline TreeGraph random_tree(std::mt19937_64& rng, int max_edges) {
  std::uniform_int_distribution<int> size(1, max_edges);
  std::uniform_real_distribution<double> len(0.5, 2.0);
  const int n = size(rng);
  std::vector<Edge> edges;
  edges.push_back({1, 0, 1, len(rng)});
  for (int j = 2; j <= n; ++j) {
    // Parent among non-root vertices keeps the root a boundary vertex.
    std::uniform_int_distribution<int> pick(1, j - 1);
    edges.push_back({j, pick(rng), j, len(rng)});
  }
  return TreeGraph::build(edges);
}

}  // namespace qg::testing

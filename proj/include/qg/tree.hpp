#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qg {

/// Error thrown when an edge list does not describe a valid rooted metric tree.
class TreeError : public std::runtime_error {
 public:
  explicit TreeError(const std::string& what) : std::runtime_error(what) {}
};

struct Edge {
  int id = 0;      // in 1..N
  int parent = 0;  // initial vertex (closer to the root)
  int child = 0;   // terminal vertex
  double length = 0.0;
};

/// Rooted metric tree: N edges, N+1 vertices, vertex 0 the root.
/// Coordinates are path lengths from the root; every edge j spans the
/// interval (x(I_j), x(T_j)) in the global coordinate.
/// Immutable after construction.
class TreeGraph {
 public:
  TreeGraph() = default;  // empty; populate via build()

  static TreeGraph build(const std::vector<Edge>& edges);

  int num_edges() const { return static_cast<int>(edges_.size()); }
  int num_vertices() const { return num_edges() + 1; }

  const Edge& edge(int j) const { return edges_.at(j - 1); }
  double length(int j) const { return edge(j).length; }
  int initial_vertex(int j) const { return edge(j).parent; }
  int terminal_vertex(int j) const { return edge(j).child; }

  double coordinate(int k) const { return coord_.at(k); }
  double x_initial(int j) const { return coordinate(initial_vertex(j)); }
  double x_terminal(int j) const { return coordinate(terminal_vertex(j)); }

  /// S_I(k): edges whose initial vertex is k.
  const std::vector<int>& edges_starting_at(int k) const { return s_initial_.at(k); }
  /// S_T(k): edges whose terminal vertex is k.
  const std::vector<int>& edges_ending_at(int k) const { return s_terminal_.at(k); }

  int degree(int k) const {
    return static_cast<int>(s_initial_.at(k).size() + s_terminal_.at(k).size());
  }
  bool is_boundary(int k) const { return degree(k) == 1; }

  const std::vector<int>& boundary_vertices() const { return boundary_; }
  const std::vector<int>& inner_vertices() const { return inner_; }

  /// d(k,j): +1 if edge j terminates at vertex k, -1 if it starts there, 0 otherwise.
  int direction_sign(int k, int j) const;

  /// Graph multipliers eta_j: 1 on the root edge, scaled by |S_I(k)|^2 across
  /// each inner vertex going rootward-to-leafward. Indexed by edge id - 1.
  std::vector<double> eta_multipliers() const;

  const std::vector<Edge>& edges() const { return edges_; }

 private:
  std::vector<Edge> edges_;                  // by id-1
  std::vector<double> coord_;                // by vertex id
  std::vector<std::vector<int>> s_initial_;  // by vertex id
  std::vector<std::vector<int>> s_terminal_;
  std::vector<int> boundary_;
  std::vector<int> inner_;
};

}  // namespace qg

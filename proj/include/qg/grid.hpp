#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "qg/tree.hpp"

namespace qg {

using Complex = std::complex<double>;

/// Per-edge uniform grids including both endpoints; the nodes at a shared
/// vertex are the same logical point on every incident edge.
class GridSpec {
 public:
  GridSpec(const TreeGraph& tree, std::vector<int> nodes_per_edge);
  static GridSpec uniform(const TreeGraph& tree, int nodes_per_edge);
  /// Refined grid: every edge step halved (n -> 2n - 1).
  GridSpec refined(const TreeGraph& tree) const;

  int nodes(int j) const { return nodes_.at(j - 1); }
  double step(int j) const { return step_.at(j - 1); }
  double max_step() const;

  /// Global coordinates of edge j's nodes.
  Eigen::VectorXd coords(const TreeGraph& tree, int j) const;

 private:
  std::vector<int> nodes_;
  std::vector<double> step_;
};

/// Complex field sampled on the per-edge grids.
struct GridFunction {
  std::vector<Eigen::VectorXcd> edge;  // by edge id - 1

  static GridFunction zeros(const TreeGraph& tree, const GridSpec& grid);

  Eigen::VectorXcd& on(int j) { return edge.at(j - 1); }
  const Eigen::VectorXcd& on(int j) const { return edge.at(j - 1); }

  GridFunction& operator+=(const GridFunction& o);
  GridFunction& operator-=(const GridFunction& o);
  GridFunction& operator*=(Complex z);
  friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
  friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
  friend GridFunction operator*(Complex z, GridFunction a) { return a *= z; }

  double sup_norm() const;
};

/// d/dx on every edge: second-order central differences in the interior,
/// second-order one-sided stencils at the endpoints. Exact on quadratics.
GridFunction spatial_derivative(const TreeGraph& tree, const GridSpec& grid,
                                const GridFunction& u);

/// Composite trapezoid of a per-node integrand over one edge.
double trapezoid(const Eigen::VectorXd& values, double h);

}  // namespace qg

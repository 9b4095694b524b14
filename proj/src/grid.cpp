#include "qg/grid.hpp"

#include <algorithm>
#include <stdexcept>

namespace qg {

GridSpec::GridSpec(const TreeGraph& tree, std::vector<int> nodes_per_edge)
    : nodes_(std::move(nodes_per_edge)) {
  if (static_cast<int>(nodes_.size()) != tree.num_edges())
    throw std::invalid_argument("grid spec must cover every edge");
  step_.resize(nodes_.size());
  for (int j = 1; j <= tree.num_edges(); ++j) {
    if (nodes_[j - 1] < 3) throw std::invalid_argument("grid too coarse: need >= 3 nodes per edge");
    step_[j - 1] = tree.length(j) / (nodes_[j - 1] - 1);
  }
}

GridSpec GridSpec::uniform(const TreeGraph& tree, int nodes_per_edge) {
  return GridSpec(tree, std::vector<int>(tree.num_edges(), nodes_per_edge));
}

GridSpec GridSpec::refined(const TreeGraph& tree) const {
  std::vector<int> n(nodes_.size());
  for (size_t i = 0; i < nodes_.size(); ++i) n[i] = 2 * nodes_[i] - 1;
  return GridSpec(tree, std::move(n));
}

double GridSpec::max_step() const { return *std::max_element(step_.begin(), step_.end()); }

Eigen::VectorXd GridSpec::coords(const TreeGraph& tree, int j) const {
  return Eigen::VectorXd::LinSpaced(nodes(j), tree.x_initial(j), tree.x_terminal(j));
}

GridFunction GridFunction::zeros(const TreeGraph& tree, const GridSpec& grid) {
  GridFunction f;
  f.edge.reserve(tree.num_edges());
  for (int j = 1; j <= tree.num_edges(); ++j)
    f.edge.push_back(Eigen::VectorXcd::Zero(grid.nodes(j)));
  return f;
}

GridFunction& GridFunction::operator+=(const GridFunction& o) {
  for (size_t i = 0; i < edge.size(); ++i) edge[i] += o.edge[i];
  return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& o) {
  for (size_t i = 0; i < edge.size(); ++i) edge[i] -= o.edge[i];
  return *this;
}

GridFunction& GridFunction::operator*=(Complex z) {
  for (auto& v : edge) v *= z;
  return *this;
}

double GridFunction::sup_norm() const {
  double m = 0.0;
  for (const auto& v : edge) if (v.size() > 0) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

GridFunction spatial_derivative(const TreeGraph& tree, const GridSpec& grid,
                                const GridFunction& u) {
  GridFunction d = GridFunction::zeros(tree, grid);
  for (int j = 1; j <= tree.num_edges(); ++j) {
    const auto& v = u.on(j);
    auto& w = d.on(j);
    const int n = grid.nodes(j);
    const double h = grid.step(j);
    w(0) = (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h);
    w.segment(1, n - 2) = (v.segment(2, n - 2) - v.segment(0, n - 2)) / (2.0 * h);
    w(n - 1) = (3.0 * v(n - 1) - 4.0 * v(n - 2) + v(n - 3)) / (2.0 * h);
  }
  return d;
}

double trapezoid(const Eigen::VectorXd& values, double h) {
  const auto n = values.size();
  if (n < 2) return 0.0;
  return h * (values.sum() - 0.5 * (values(0) + values(n - 1)));
}

}  // namespace qg

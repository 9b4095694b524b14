#include "qg/solver.hpp"

#include <cmath>
#include <random>

namespace qg {

namespace {
const Complex kI(0.0, 1.0);
}

NodeIndex::NodeIndex(const TreeGraph& tree, const GridSpec& grid) : tree_(&tree), grid_(&grid) {
  interior_offset_.resize(tree.num_edges());
  int next = tree.num_vertices();
  for (int j = 1; j <= tree.num_edges(); ++j) {
    interior_offset_[j - 1] = next;
    next += grid.nodes(j) - 2;
  }
  total = next;
}

int NodeIndex::node(int j, int i) const {
  const int n = grid_->nodes(j);
  if (i == 0) return tree_->initial_vertex(j);
  if (i == n - 1) return tree_->terminal_vertex(j);
  return interior_offset_[j - 1] + i - 1;
}

GridFunction NodeIndex::unpack(const TreeGraph& tree, const GridSpec& grid,
                               const Eigen::VectorXcd& x) const {
  GridFunction u = GridFunction::zeros(tree, grid);
  for (int j = 1; j <= tree.num_edges(); ++j)
    for (int i = 0; i < grid.nodes(j); ++i) u.on(j)(i) = x(node(j, i));
  return u;
}

Eigen::VectorXcd NodeIndex::pack(const TreeGraph& tree, const GridSpec& grid,
                                 const GridFunction& u) const {
  Eigen::VectorXcd x = Eigen::VectorXcd::Zero(total);
  for (int j = 1; j <= tree.num_edges(); ++j)
    for (int i = 0; i < grid.nodes(j); ++i) x(node(j, i)) = u.on(j)(i);
  return x;
}

namespace {

using Triplets = std::vector<Eigen::Triplet<Complex>>;

// One-sided derivative stencil at an edge endpoint, indexed from the endpoint
// into the edge. The same coefficients give the backward derivative at a
// terminal end and minus the forward derivative at an initial end, which is
// exactly the orientation the flux balance needs. 4-point (third order) so
// the vertex coupling does not limit interior second-order accuracy; 3-point
// fallback on 3-node edges.
std::vector<double> endpoint_stencil(int n, double h) {
  if (n >= 4) return {11.0 / (6 * h), -18.0 / (6 * h), 9.0 / (6 * h), -2.0 / (6 * h)};
  return {3.0 / (2 * h), -4.0 / (2 * h), 1.0 / (2 * h)};
}

// Flux-balance row at inner vertex k (terminal side minus initial side).
void add_flux_row(const TreeGraph& tree, const GridSpec& grid, const NodeIndex& idx, int k,
                  Triplets& trip) {
  const int row = idx.vertex(k);
  for (int j : tree.edges_ending_at(k)) {
    const int n = grid.nodes(j);
    const auto w = endpoint_stencil(n, grid.step(j));
    for (size_t q = 0; q < w.size(); ++q)
      trip.emplace_back(row, idx.node(j, n - 1 - static_cast<int>(q)), Complex(w[q], 0));
  }
  for (int j : tree.edges_starting_at(k)) {
    const auto w = endpoint_stencil(grid.nodes(j), grid.step(j));
    for (size_t q = 0; q < w.size(); ++q)
      trip.emplace_back(row, idx.node(j, static_cast<int>(q)), Complex(w[q], 0));
  }
}

// Net flux at inner vertex k using the same stencils as add_flux_row.
Complex net_flux(const TreeGraph& tree, const GridSpec& grid, const GridFunction& u, int k) {
  Complex net = 0.0;
  for (int j : tree.edges_ending_at(k)) {
    const int n = grid.nodes(j);
    const auto w = endpoint_stencil(n, grid.step(j));
    for (size_t q = 0; q < w.size(); ++q) net += w[q] * u.on(j)(n - 1 - static_cast<int>(q));
  }
  for (int j : tree.edges_starting_at(k)) {
    const auto w = endpoint_stencil(grid.nodes(j), grid.step(j));
    for (size_t q = 0; q < w.size(); ++q) net += w[q] * u.on(j)(static_cast<int>(q));
  }
  return net;
}

double inverse_norm_estimate(const Eigen::SparseLU<Eigen::SparseMatrix<Complex>>& lu, int n) {
  std::mt19937_64 rng(0x9e3779b9u);
  std::uniform_int_distribution<int> coin(0, 1);
  double est = 0.0;
  for (int probe = 0; probe < 4; ++probe) {
    Eigen::VectorXcd b(n);
    for (int i = 0; i < n; ++i) b(i) = coin(rng) ? 1.0 : -1.0;
    const Eigen::VectorXcd x = lu.solve(b);
    est = std::max(est, x.cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff());
  }
  return est;
}

double row_sum_norm(const Eigen::SparseMatrix<Complex>& a) {
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(a.rows());
  for (int c = 0; c < a.outerSize(); ++c)
    for (Eigen::SparseMatrix<Complex>::InnerIterator it(a, c); it; ++it)
      sums(it.row()) += std::abs(it.value());
  return sums.maxCoeff();
}

}  // namespace

StationaryResult solve_stationary(const TreeGraph& tree, const GridSpec& grid,
                                  const StationaryProblem& problem, double condition_limit) {
  const NodeIndex idx(tree, grid);
  Triplets trip;
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(idx.total);

  for (int j = 1; j <= tree.num_edges(); ++j) {
    const int n = grid.nodes(j);
    const double h = grid.step(j);
    const auto& p = problem.potential.at(j - 1);
    for (int i = 1; i < n - 1; ++i) {
      const int row = idx.node(j, i);
      trip.emplace_back(row, idx.node(j, i - 1), Complex(1.0 / (h * h), 0));
      trip.emplace_back(row, idx.node(j, i + 1), Complex(1.0 / (h * h), 0));
      trip.emplace_back(row, row, Complex(-2.0 / (h * h) + p(i) + problem.omega, 0));
      b(row) = problem.source.on(j)(i);
    }
  }
  for (int k : tree.boundary_vertices()) {
    trip.emplace_back(idx.vertex(k), idx.vertex(k), Complex(1.0, 0));
    const auto it = problem.boundary.find(k);
    b(idx.vertex(k)) = it == problem.boundary.end() ? Complex(0) : it->second;
  }
  for (int k : tree.inner_vertices()) add_flux_row(tree, grid, idx, k, trip);

  Eigen::SparseMatrix<Complex> a(idx.total, idx.total);
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success)
    throw SolverError("stationary system is singular (omega at a discrete eigenvalue?)");

  StationaryResult result;
  result.condition_estimate = row_sum_norm(a) * inverse_norm_estimate(lu, idx.total);
  if (result.condition_estimate > condition_limit)
    throw SolverError("stationary system near-singular, condition estimate " +
                      std::to_string(result.condition_estimate));

  result.u = idx.unpack(tree, grid, lu.solve(b));

  for (int k : tree.inner_vertices())
    result.kirchhoff_residual =
        std::max(result.kirchhoff_residual, std::abs(net_flux(tree, grid, result.u, k)));
  return result;
}

std::vector<Eigen::VectorXd> constant_potential(const TreeGraph& tree, const GridSpec& grid,
                                                const std::vector<double>& value_per_edge) {
  std::vector<Eigen::VectorXd> p;
  for (int j = 1; j <= tree.num_edges(); ++j)
    p.push_back(Eigen::VectorXd::Constant(grid.nodes(j), value_per_edge.at(j - 1)));
  return p;
}

std::vector<Eigen::VectorXd> piecewise_potential(const TreeGraph& tree, const GridSpec& grid,
                                                 const std::vector<Eigen::VectorXd>& cells) {
  std::vector<Eigen::VectorXd> p;
  for (int j = 1; j <= tree.num_edges(); ++j) {
    const auto& c = cells.at(j - 1);
    const int n = grid.nodes(j);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) {
      // Cell of the node's midpoint position; last node folds into last cell.
      int cell = static_cast<int>(static_cast<double>(i) / (n - 1) * c.size());
      cell = std::min<int>(cell, static_cast<int>(c.size()) - 1);
      v(i) = c(cell);
    }
    p.push_back(std::move(v));
  }
  return p;
}

GridFunction ModalSolution::eval(const TreeGraph& tree, const GridSpec& grid, double t,
                                 int dt_order) const {
  GridFunction out = GridFunction::zeros(tree, grid);
  for (const Mode& m : modes) {
    Complex factor = std::exp(-kI * (m.omega * t + m.phase));
    for (int d = 0; d < dt_order; ++d) factor *= -kI * m.omega;
    for (size_t e = 0; e < out.edge.size(); ++e) out.edge[e] += factor * m.U.edge[e];
  }
  return out;
}

ModalSolution ModalSolution::derivative(const TreeGraph& tree, const GridSpec& grid) const {
  ModalSolution d;
  d.T = T;
  for (const Mode& m : modes) d.modes.push_back({m.omega, m.phase, spatial_derivative(tree, grid, m.U)});
  return d;
}

double ModalSolution::max_omega() const {
  double w = 0.0;
  for (const Mode& m : modes) w = std::max(w, std::abs(m.omega));
  return w;
}

TimeSampledSolution assemble_time_solution(const TreeGraph& tree, const GridSpec& grid,
                                           const ModalSolution& modal,
                                           const Eigen::VectorXd& times) {
  TimeSampledSolution s;
  s.times = times;
  for (int i = 0; i < times.size(); ++i) {
    s.u.push_back(modal.eval(tree, grid, times(i), 0));
    s.ut.push_back(modal.eval(tree, grid, times(i), 1));
    s.utt.push_back(modal.eval(tree, grid, times(i), 2));
  }
  return s;
}

ModalPair solve_modal(const TreeGraph& tree, const GridSpec& grid,
                      const std::vector<Eigen::VectorXd>& potential,
                      const std::vector<ModeSpec>& specs, double T) {
  ModalPair out;
  out.u.T = out.f.T = T;
  for (const ModeSpec& spec : specs) {
    StationaryProblem problem;
    problem.omega = spec.omega;
    problem.phase = spec.phase;
    problem.potential = potential;
    problem.source = spec.F;
    problem.boundary = spec.boundary;
    out.u.modes.push_back({spec.omega, spec.phase, solve_stationary(tree, grid, problem).u});
    out.f.modes.push_back({spec.omega, spec.phase, spec.F});
  }
  return out;
}

CrankNicolson::CrankNicolson(const TreeGraph& tree, const GridSpec& grid,
                             const std::vector<Eigen::VectorXd>& potential, double dt)
    : tree_(tree), grid_(grid), potential_(potential), dt_(dt) {
  const NodeIndex idx(tree, grid);
  total_ = idx.total;
  Triplets lhs_trip, rhs_trip;

  // Interior rows: (i/dt) u' + L u'/2 = (i/dt) u - L u/2 + f(t + dt/2),
  // with L u = u_xx + p u.
  for (int j = 1; j <= tree.num_edges(); ++j) {
    const int n = grid.nodes(j);
    const double h = grid.step(j);
    const auto& p = potential_.at(j - 1);
    for (int i = 1; i < n - 1; ++i) {
      const int row = idx.node(j, i);
      const Complex off(0.5 / (h * h), 0);
      const Complex diag(0.5 * (-2.0 / (h * h) + p(i)), 0);
      lhs_trip.emplace_back(row, idx.node(j, i - 1), off);
      lhs_trip.emplace_back(row, idx.node(j, i + 1), off);
      lhs_trip.emplace_back(row, row, diag + kI / dt_);
      rhs_trip.emplace_back(row, idx.node(j, i - 1), -off);
      rhs_trip.emplace_back(row, idx.node(j, i + 1), -off);
      rhs_trip.emplace_back(row, row, -diag + kI / dt_);
    }
  }
  for (int k : tree.boundary_vertices())
    lhs_trip.emplace_back(idx.vertex(k), idx.vertex(k), Complex(1.0, 0));
  for (int k : tree.inner_vertices()) add_flux_row(tree, grid, idx, k, lhs_trip);

  lhs_.resize(total_, total_);
  lhs_.setFromTriplets(lhs_trip.begin(), lhs_trip.end());
  rhs_.resize(total_, total_);
  rhs_.setFromTriplets(rhs_trip.begin(), rhs_trip.end());
  lu_.compute(lhs_);
  if (lu_.info() != Eigen::Success) throw SolverError("time-step system factorization failed");
}

GridFunction CrankNicolson::step(const GridFunction& u, double t, const SourceFn& source,
                                 const BoundaryFn& boundary) const {
  const NodeIndex idx(tree_, grid_);
  Eigen::VectorXcd b = rhs_ * idx.pack(tree_, grid_, u);
  const GridFunction f = source(t + 0.5 * dt_);
  for (int j = 1; j <= tree_.num_edges(); ++j)
    for (int i = 1; i < grid_.nodes(j) - 1; ++i) b(idx.node(j, i)) += f.on(j)(i);
  for (const auto& [k, value] : boundary(t + dt_)) b(idx.vertex(k)) = value;
  return idx.unpack(tree_, grid_, lu_.solve(b));
}

double time_step_crosscheck(const TreeGraph& tree, const GridSpec& grid,
                            const std::vector<Eigen::VectorXd>& potential,
                            const ModalSolution& reference,
                            const CrankNicolson::SourceFn& source, double t0, double t1,
                            double dt) {
  if (reference.max_omega() * std::abs(dt) > 1.0)
    throw SolverError("time step does not resolve the largest mode frequency");
  const CrankNicolson stepper(tree, grid, potential, dt);

  CrankNicolson::BoundaryFn boundary = [&](double t) {
    std::map<int, Complex> g;
    for (int k : tree.boundary_vertices()) {
      Complex v = 0.0;
      for (const Mode& m : reference.modes) {
        const int j = k == 0 ? tree.edges_starting_at(0).front() : tree.edges_ending_at(k).front();
        const int i = k == 0 ? 0 : grid.nodes(j) - 1;
        v += m.U.on(j)(i) * std::exp(-kI * (m.omega * t + m.phase));
      }
      g[k] = v;
    }
    return g;
  };

  GridFunction u = reference.eval(tree, grid, t0);
  double deviation = 0.0;
  const int steps = static_cast<int>(std::llround((t1 - t0) / dt));
  double t = t0;
  for (int n = 0; n < steps; ++n) {
    u = stepper.step(u, t, source, boundary);
    t = t0 + (n + 1) * dt;
    deviation = std::max(deviation, (u - reference.eval(tree, grid, t)).sup_norm());
    if (!(deviation < 1e6)) throw SolverError("time stepping unstable: deviation blew up");
  }
  return deviation;
}

}  // namespace qg

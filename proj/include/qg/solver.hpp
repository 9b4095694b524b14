#pragma once

#include <Eigen/Sparse>
#include <functional>
#include <map>

#include "qg/grid.hpp"

namespace qg {

class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

/// Stationary modal problem U'' + (p + omega) U = F with Kirchhoff coupling
/// at inner vertices and Dirichlet data at boundary vertices.
struct StationaryProblem {
  double omega = 0.0;
  double phase = 0.0;
  std::vector<Eigen::VectorXd> potential;        // per edge, nodal, real
  GridFunction source;                           // F, complex
  std::map<int, Complex> boundary;               // boundary vertex id -> value (default 0)
};

struct StationaryResult {
  GridFunction u;
  double condition_estimate = 0.0;
  double kirchhoff_residual = 0.0;  // max |sum_T dU - sum_I dU| via one-sided stencils
};

/// Second-order centered discretization per edge interior; one shared unknown
/// per vertex; flux balance rows with 3-point one-sided stencils, derivatives
/// taken w.r.t. the global coordinate on every edge.
StationaryResult solve_stationary(const TreeGraph& tree, const GridSpec& grid,
                                  const StationaryProblem& problem,
                                  double condition_limit = 1e10);

/// Nodal potential from per-edge constants.
std::vector<Eigen::VectorXd> constant_potential(const TreeGraph& tree, const GridSpec& grid,
                                                const std::vector<double>& value_per_edge);
/// Nodal potential from per-edge piecewise-constant coefficients (equal cells).
std::vector<Eigen::VectorXd> piecewise_potential(const TreeGraph& tree, const GridSpec& grid,
                                                 const std::vector<Eigen::VectorXd>& cells);

/// One mode of u = sum_m U_m(x) exp(-i (omega_m t + phase_m)).
struct Mode {
  double omega = 0.0;
  double phase = 0.0;
  GridFunction U;
};

struct ModalSolution {
  double T = 1.0;
  std::vector<Mode> modes;

  /// u(x, t) with dt_order analytic time derivatives (each mode scaled by
  /// (-i omega)^dt_order).
  GridFunction eval(const TreeGraph& tree, const GridSpec& grid, double t,
                    int dt_order = 0) const;

  /// Mode-wise spatial derivative; represents d/dx u as a modal solution.
  ModalSolution derivative(const TreeGraph& tree, const GridSpec& grid) const;

  double max_omega() const;
};

/// Time-sampled assembly of the modal sum, plus analytic first and second
/// time derivatives.
struct TimeSampledSolution {
  Eigen::VectorXd times;
  std::vector<GridFunction> u, ut, utt;
};
TimeSampledSolution assemble_time_solution(const TreeGraph& tree, const GridSpec& grid,
                                           const ModalSolution& modal,
                                           const Eigen::VectorXd& times);

/// One stationary solve per requested mode (source F and boundary amplitudes
/// per mode); returns the assembled modal solution u and the matching modal
/// source f with the same frequencies and phases.
struct ModeSpec {
  double omega = 0.0;
  double phase = 0.0;
  std::map<int, Complex> boundary;
  GridFunction F;
};
struct ModalPair {
  ModalSolution u, f;
};
ModalPair solve_modal(const TreeGraph& tree, const GridSpec& grid,
                      const std::vector<Eigen::VectorXd>& potential,
                      const std::vector<ModeSpec>& specs, double T);

/// Implicit-midpoint (Crank-Nicolson) stepper for
///   i u_t + u_xx + p u = f(x, t)
/// with Kirchhoff coupling, Dirichlet boundary data, stepping from t0 by a
/// fixed (possibly negative) dt.
class CrankNicolson {
 public:
  using SourceFn = std::function<GridFunction(double)>;                 // f(., t)
  using BoundaryFn = std::function<std::map<int, Complex>(double)>;     // g_k(t)

  CrankNicolson(const TreeGraph& tree, const GridSpec& grid,
                const std::vector<Eigen::VectorXd>& potential, double dt);

  /// Advances u from time t to t + dt.
  GridFunction step(const GridFunction& u, double t, const SourceFn& source,
                    const BoundaryFn& boundary) const;

 private:
  const TreeGraph& tree_;
  const GridSpec& grid_;
  std::vector<Eigen::VectorXd> potential_;
  double dt_;
  Eigen::SparseMatrix<Complex> lhs_, rhs_;
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu_;
  int total_;

  friend struct StepperAccess;
};

/// Steps the full system from the modal state at t0 across [t0, t1] and
/// returns the sup-norm deviation from the analytic modal assembly.
double time_step_crosscheck(const TreeGraph& tree, const GridSpec& grid,
                            const std::vector<Eigen::VectorXd>& potential,
                            const ModalSolution& reference,
                            const CrankNicolson::SourceFn& source, double t0, double t1,
                            double dt);

// Shared vertex/interior index layout used by the implicit solvers.
struct NodeIndex {
  explicit NodeIndex(const TreeGraph& tree, const GridSpec& grid);
  int total = 0;
  int vertex(int k) const { return k; }
  int node(int j, int i) const;  // i in 0..n_j-1, endpoints map to vertex slots
  GridFunction unpack(const TreeGraph& tree, const GridSpec& grid,
                      const Eigen::VectorXcd& x) const;
  Eigen::VectorXcd pack(const TreeGraph& tree, const GridSpec& grid,
                        const GridFunction& u) const;

 private:
  const TreeGraph* tree_;
  const GridSpec* grid_;
  std::vector<int> interior_offset_;  // by edge id - 1
};

}  // namespace qg

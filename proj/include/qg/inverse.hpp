#pragma once

#include <optional>
#include <random>

#include "qg/solver.hpp"

namespace qg {

class AdmissibilityError : public std::runtime_error {
 public:
  AdmissibilityError(const std::string& what, double min_abs_z)
      : std::runtime_error(what), min_abs_z(min_abs_z) {}
  double min_abs_z = 0.0;
};

/// Forward scenario for system i u_t + u_xx + p u = 0 with modal boundary
/// drive: u(x(V_k), t) = sum_m amp[k][m] exp(-i (omega_m t + phase_m)),
/// omega_m = m pi / T.
struct ForwardSpec {
  double T = 1.0;
  std::vector<int> mode_numbers;                    // m >= 0
  std::vector<double> phases;                       // per mode
  std::map<int, std::vector<double>> boundary_amp;  // boundary vertex -> per-mode amplitude

  double omega(size_t mi) const { return mode_numbers.at(mi) * M_PI / T; }
};

/// Boundary observation at one observed vertex: time series of
/// d_t^m d_x u on the unique edge ending there, m = 1, 2.
struct Observation {
  int vertex = -1;
  int edge = -1;
  Eigen::VectorXd times;
  Eigen::VectorXcd d1, d2;
};
using ObservationSet = std::vector<Observation>;

struct SynthesisResult {
  ModalSolution u;
  GridFunction z;        // u(., 0)
  double min_abs_z = 0;  // for the |z| >= r admissibility check
  ObservationSet observations;
};

/// Solves one stationary problem per mode (f = 0), assembles u, extracts
/// z = u(., 0) and the boundary observations with analytic time derivatives.
/// Throws AdmissibilityError when min |z| < r (r > 0). Optional relative
/// Gaussian noise on the observation series, seeded.
SynthesisResult synthesize_forward(const TreeGraph& tree, const GridSpec& grid,
                                   const std::vector<Eigen::VectorXd>& potential,
                                   const ForwardSpec& spec, int time_samples, double r = 0.0,
                                   double noise_level = 0.0, unsigned seed = 0);

/// A pair of solutions of the governing system sharing the same initial data z and
/// boundary drive: u_hat is modal for p_hat; u_bar = u_tilde - u_hat is the
/// Crank-Nicolson solution of the difference system
///   i v_t + v_xx + p_tilde v = -(p_tilde - p_hat) u_hat,  v(., 0) = 0,
/// stepped over [-T, T].
struct DifferencePair {
  ModalSolution u_hat;
  GridFunction z;
  double min_abs_z = 0;
  double dt = 0;           // observation-series step
  double snapshot_dt = 0;  // fine step used for the snapshots around t = 0
  // u_bar around t = 0 (index 2 is t = 0) for the initial-identity checks,
  // spaced snapshot_dt apart.
  std::vector<GridFunction> snapshots;
  // Per observed boundary vertex: d_x u_bar time series on the full window.
  ObservationSet observations;  // d1/d2 are time-difference derivatives of the flux
};

DifferencePair make_difference_pair(const TreeGraph& tree, const GridSpec& grid,
                                    const std::vector<Eigen::VectorXd>& p_tilde,
                                    const std::vector<Eigen::VectorXd>& p_hat,
                                    const ForwardSpec& spec, int steps_per_side, double r = 0.0);

struct IdentityReport {
  double u_bar_zero = 0;   // sup |u_bar(., 0)|, zero by construction
  double first_residual = 0;   // sup |d_t u_bar(., 0) - i (p_tilde - p_hat) z|
  double second_residual = 0;  // sup norm against the second initial identity
};
IdentityReport initial_identity_check(const TreeGraph& tree, const GridSpec& grid,
                                      const std::vector<Eigen::VectorXd>& p_tilde,
                                      const std::vector<Eigen::VectorXd>& p_hat,
                                      const DifferencePair& pair);

/// Piecewise-constant potential parametrization (n_param equal cells / edge).
using PotentialCells = std::vector<Eigen::VectorXd>;

struct ReconstructionConfig {
  double lambda = 0.0;
  int max_iter = 500;
  int n_param = 1;
  double bound_M = 5.0;
  double fd_step = 1e-4;       // parameter-space finite-difference step
  double initial_step = 1.0;   // gradient step, adapted by backtracking
  std::optional<PotentialCells> prior;
};

/// Output-least-squares data misfit of a candidate potential against the
/// observation set, plus the Tikhonov penalty.
double misfit(const TreeGraph& tree, const GridSpec& grid, const PotentialCells& candidate,
              const ObservationSet& observations, const ForwardSpec& spec,
              const ReconstructionConfig& config);

struct PotentialEstimate {
  PotentialCells p;
  std::vector<double> misfit_history;
  bool converged = false;
};

/// Projected gradient descent over the piecewise-constant coefficients with
/// backtracking; projection onto [-M, M]; stops on max_iter or relative
/// misfit decrease below 1e-8.
PotentialEstimate reconstruct(const TreeGraph& tree, const GridSpec& grid,
                              const ObservationSet& observations, const ForwardSpec& spec,
                              const ReconstructionConfig& config);

struct RatioRow {
  double numerator = 0;    // sum_j int |p_tilde - p_hat|^2 dx
  double denominator = 0;  // sum_{k,m} int |d_t^m d_x u_bar|^2 dt
  double ratio = 0;
  bool defined = false;
  double min_abs_z = 0;
};

/// Stability ratio for one admissible pair; observed_vertices defaults to all
/// of Pi_1 \ {0}.
RatioRow lipschitz_ratio(const TreeGraph& tree, const GridSpec& grid,
                         const std::vector<Eigen::VectorXd>& p_tilde,
                         const std::vector<Eigen::VectorXd>& p_hat, const ForwardSpec& spec,
                         int steps_per_side, double r = 0.0,
                         const std::vector<int>* observed_vertices = nullptr);

struct StabilityReport {
  std::vector<RatioRow> rows;
  double empirical_c = 0;
  int skipped = 0;
  unsigned seed = 0;
};

struct SamplerSpec {
  double bound_M = 1.0;
  int n_param = 1;
  double r = 0.0;
  double scale = 1.0;  // perturbation magnitude within [-M, 0]
};

/// Deterministic given seed: samples potential pairs with entries in [-M, 0],
/// skips pairs whose base solution violates |z| >= r, aggregates ratios.
StabilityReport stability_sweep(const TreeGraph& tree, const GridSpec& grid,
                                const ForwardSpec& spec, const SamplerSpec& sampler, int n_pairs,
                                unsigned seed, int steps_per_side,
                                const std::vector<int>* observed_vertices = nullptr);

/// Difference of two potentials as nodal grid data.
std::vector<Eigen::VectorXd> potential_difference(const std::vector<Eigen::VectorXd>& a,
                                                  const std::vector<Eigen::VectorXd>& b);

}  // namespace qg

#pragma once

#include <json.hpp>

#include "qg/solver.hpp"
#include "qg/weights.hpp"

namespace qg {

/// Everything both sides of the estimate need: the modal solution, the modal
/// source, the weight family, and the clipped time window / quadrature size.
struct CarlemanInputs {
  ModalSolution u;
  ModalSolution f;
  const WeightFamily* family = nullptr;
  double clip = 0.0;    // eps_t; window is [-T+clip, T-clip]
  int time_samples = 257;
};

/// sum_j int_{Q_j} (s^3 theta^3 |u|^2 + s theta |du|^2) e^{2 s phi} dx dt.
/// Throws if the clipped tail is not certified below the 1e-30 integrand bound.
double lhs_functional(const TreeGraph& tree, const GridSpec& grid, const CarlemanInputs& in,
                      double s);

/// sum_j int_{Q_j} |f_j|^2 e^{2 s phi_j} dx dt; the per-mode variant sums the
/// mode-wise integrals instead (per-mode bound form).
double rhs_data_functional(const TreeGraph& tree, const GridSpec& grid, const CarlemanInputs& in,
                           double s, bool per_mode = false);

enum class BoundaryForm { windowed, static_bound };

/// Weighted boundary-flux term: windowed keeps the subtracted root-side term
/// on the clipped window; static_bound is the t-independent-weight upper bound
/// on [-T, T].
double boundary_term(const TreeGraph& tree, const GridSpec& grid, const CarlemanInputs& in,
                     double s, BoundaryForm form);

struct SweepRow {
  double s = 0, lhs = 0, rhs_data = 0, b_windowed = 0, b_static = 0, ratio = 0;
  bool flagged = false;  // denominator hit the floor
};

struct CarlemanReport {
  std::vector<SweepRow> rows;
  double s0 = 0.0;         // empirical threshold (5% running-max rule)
  double empirical_c = 0;  // max ratio over s >= s0
};

/// Evaluates all functionals per s and derives the empirical s0 and C.
/// Denominator is rhs_data + max(B,0) + 1e-300.
CarlemanReport ratio_sweep(const TreeGraph& tree, const GridSpec& grid, const CarlemanInputs& in,
                           const std::vector<double>& s_grid);

/// w = u e^{s phi} at time t, split into real and imaginary parts.
std::pair<GridFunction, GridFunction> transform_w(const TreeGraph& tree, const GridSpec& grid,
                                                  const ModalSolution& u,
                                                  const WeightFamily& family, double s, double t);

/// The four vertex terms of the integration-by-parts decomposition plus the
/// absolute-value scale of each (for discretization-relative tolerances).
struct ProofTerms {
  int vertex = -1;
  double d[4] = {0, 0, 0, 0};
  double scale[4] = {0, 0, 0, 0};
};
std::vector<ProofTerms> d_terms(const TreeGraph& tree, const GridSpec& grid,
                                const CarlemanInputs& in, double s);

/// Aggregated machine-readable certificate: weight conditions, vertex-term
/// identities at two grid levels, sweep finiteness and refinement stability.
/// The potential and mode specs are supplied as grid-level factories so the
/// refinement studies can re-sample them.
using PotentialFactory = std::function<std::vector<Eigen::VectorXd>(const GridSpec&)>;
using ModeSpecFactory = std::function<std::vector<ModeSpec>(const GridSpec&)>;
nlohmann::json carleman_certify(const TreeGraph& tree, const GridSpec& grid,
                                const WeightFamily& family, const PotentialFactory& potential,
                                const ModeSpecFactory& mode_specs,
                                const std::vector<double>& s_grid, double s_dterm = 2.0);

Eigen::VectorXd clipped_time_grid(double T, double clip, int nt);

}  // namespace qg

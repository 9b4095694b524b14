#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <string>
#include <vector>

#include "qg/tree.hpp"

namespace qg {

// The vertex matching constraints are exact algebraic identities between the
// polynomial coefficients, so everything here is done in arbitrary-precision
// rationals; doubles only appear in the evaluation layer.
using Rational = boost::multiprecision::cpp_rational;

Rational rational_from_double(double x);
double to_double(const Rational& r);

/// psi_j(x) = a x^2 + b x + c on the edge's global-coordinate interval.
struct EdgePoly {
  Rational a, b, c;

  Rational eval(const Rational& x) const { return (a * x + b) * x + c; }
  Rational deriv(const Rational& x) const { return 2 * a * x + b; }
};

/// The weight family phi_j = theta(t) psi_j(x) for a fixed tree and horizon T.
class WeightFamily {
 public:
  WeightFamily(std::vector<EdgePoly> polys, double T) : polys_(std::move(polys)), T_(T) {}

  const EdgePoly& poly(int j) const { return polys_.at(j - 1); }
  int num_edges() const { return static_cast<int>(polys_.size()); }
  double horizon() const { return T_; }

  std::vector<EdgePoly>& polys() { return polys_; }
  const std::vector<EdgePoly>& polys() const { return polys_; }

 private:
  std::vector<EdgePoly> polys_;  // by edge id - 1
  double T_;
};

/// Propagates the root polynomial leafward through the 3x3 vertex matching
/// system, then shifts all constant terms so that max_tree psi <= -margin.
/// Requires a > 0 and b > 0 on the root polynomial.
WeightFamily construct_weights(const TreeGraph& tree, double T, const EdgePoly& root_poly,
                               const Rational& margin = 1);

struct ConditionViolation {
  std::string what;
  int vertex = -1;  // -1 when not vertex-local
  int edge = -1;
};

struct WeightValidation {
  std::vector<ConditionViolation> violations;
  bool ok() const { return violations.empty(); }
};

/// Checks the vertex matching identities exactly on coefficients at every
/// inner vertex and the sign conditions on every closed edge interval. Violations are listed,
/// never thrown.
WeightValidation validate_conditions(const TreeGraph& tree, const WeightFamily& family);

// Time factor theta(t) = 1/((T-t)(T+t)) and its derivative, |t| < T.
double theta(double t, double T);
double theta_dot(double t, double T);

/// Analytic value of d^dx/dx d^dt/dt phi_j at (x, t); dx in 0..2, dt in 0..1.
double eval_phi(const TreeGraph& tree, const WeightFamily& family, int j, double x, double t,
                int dx_order = 0, int dt_order = 0);

/// max over sampled x in every edge of theta(t)^l exp(2 s phi_j(x, t)).
/// Decays to 0 as t -> +-T whenever the family satisfies the sign conditions.
double vanishing_check(const TreeGraph& tree, const WeightFamily& family, double s, int l,
                       double t_probe, int samples_per_edge = 33);

/// Largest psi value over the tree (attained at an edge's terminal endpoint
/// once the sign conditions hold).
Rational max_psi(const TreeGraph& tree, const WeightFamily& family);

/// Smallest clip eps_t such that theta(t)^3 exp(2 s phi) < bound at the window
/// edge t = T - eps_t, for all edges. Used to certify the clipped time tails.
double choose_clip(const TreeGraph& tree, const WeightFamily& family, double s,
                   double bound = 1e-30);

}  // namespace qg

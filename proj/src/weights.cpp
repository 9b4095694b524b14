#include "qg/weights.hpp"

#include <cmath>
#include <queue>
#include <stdexcept>

namespace qg {

Rational rational_from_double(double x) {
  if (x == 0.0) return 0;
  if (!std::isfinite(x)) throw std::invalid_argument("non-finite value has no rational form");
  int exp = 0;
  const double m = std::frexp(x, &exp);
  const auto mant = static_cast<long long>(std::ldexp(m, 53));  // exact
  exp -= 53;
  Rational r(mant);
  boost::multiprecision::cpp_int pow2 = boost::multiprecision::cpp_int(1) << std::abs(exp);
  if (exp >= 0)
    r *= Rational(pow2);
  else
    r /= Rational(pow2);
  return r;
}

double to_double(const Rational& r) { return static_cast<double>(r); }

namespace {

// Rational vertex coordinates, rebuilt from the exact binary values of the
// edge lengths so that the vertex matching stays an exact identity.
std::vector<Rational> rational_coordinates(const TreeGraph& tree) {
  std::vector<Rational> x(tree.num_vertices(), 0);
  std::queue<int> frontier;
  frontier.push(0);
  while (!frontier.empty()) {
    const int k = frontier.front();
    frontier.pop();
    for (int j : tree.edges_starting_at(k)) {
      const int c = tree.terminal_vertex(j);
      x[c] = x[k] + rational_from_double(tree.length(j));
      frontier.push(c);
    }
  }
  return x;
}

}  // namespace

WeightFamily construct_weights(const TreeGraph& tree, double T, const EdgePoly& root_poly,
                               const Rational& margin) {
  if (!(T > 0.0)) throw std::invalid_argument("horizon T must be positive");
  if (root_poly.a <= 0) throw std::invalid_argument("root polynomial needs a > 0");
  if (root_poly.b <= 0)
    throw std::invalid_argument("root derivative condition violated: need b > 0 so -b/(2a) < 0");
  if (margin < 0) throw std::invalid_argument("margin must be nonnegative");

  const auto coord = rational_coordinates(tree);
  std::vector<EdgePoly> polys(tree.num_edges());

  std::queue<int> frontier;
  for (int j : tree.edges_starting_at(0)) {
    polys[j - 1] = root_poly;
    frontier.push(j);
  }
  while (!frontier.empty()) {
    const int j1 = frontier.front();
    frontier.pop();
    const int k = tree.terminal_vertex(j1);
    const auto& children = tree.edges_starting_at(k);
    if (children.empty()) continue;
    const Rational deg = static_cast<int>(children.size());
    const Rational& xk = coord[k];
    const EdgePoly& p1 = polys[j1 - 1];
    EdgePoly p2;
    p2.a = p1.a / (deg * deg);
    p2.b = 2 * (deg - 1) * xk * p1.a / (deg * deg) + p1.b / deg;
    p2.c = (deg - 1) * (deg - 1) * xk * xk * p1.a / (deg * deg) + (deg - 1) * xk * p1.b / deg + p1.c;
    for (int j2 : children) {
      polys[j2 - 1] = p2;
      frontier.push(j2);
    }
  }

  WeightFamily family(std::move(polys), T);

  // psi is increasing on each edge once psi' > 0, so the tree maximum sits at
  // a terminal endpoint; a uniform shift of the constant terms preserves the matching identities.
  const Rational peak = max_psi(tree, family);
  if (peak > -margin) {
    const Rational shift = peak + margin;
    for (auto& p : family.polys()) p.c -= shift;
  }
  return family;
}

Rational max_psi(const TreeGraph& tree, const WeightFamily& family) {
  Rational peak;
  bool first = true;
  const auto coord = rational_coordinates(tree);
  for (int j = 1; j <= tree.num_edges(); ++j) {
    const Rational v = family.poly(j).eval(coord[tree.terminal_vertex(j)]);
    if (first || v > peak) peak = v;
    first = false;
  }
  return peak;
}

WeightValidation validate_conditions(const TreeGraph& tree, const WeightFamily& family) {
  WeightValidation report;
  const auto coord = rational_coordinates(tree);

  for (int k : tree.inner_vertices()) {
    const auto& in = tree.edges_ending_at(k);
    const auto& out = tree.edges_starting_at(k);
    if (in.size() != 1) continue;  // unreachable on a valid rooted tree
    const int j1 = in.front();
    const Rational deg = static_cast<int>(out.size());
    const Rational& xk = coord[k];
    const EdgePoly& p1 = family.poly(j1);
    for (int j2 : out) {
      const EdgePoly& p2 = family.poly(j2);
      if (p1.eval(xk) != p2.eval(xk))
        report.violations.push_back({"value continuity broken at vertex", k, j2});
      if (p1.deriv(xk) != deg * p2.deriv(xk))
        report.violations.push_back({"derivative ratio |S_I| broken at vertex", k, j2});
      if (p1.a != deg * deg * p2.a)
        report.violations.push_back({"second-derivative ratio |S_I|^2 broken at vertex", k, j2});
    }
  }

  for (int j = 1; j <= tree.num_edges(); ++j) {
    const EdgePoly& p = family.poly(j);
    if (p.a <= 0) report.violations.push_back({"psi'' <= 0 on edge", -1, j});
    // psi' is increasing (a > 0), so positivity at the initial endpoint is
    // enough; psi is then increasing, so negativity at the terminal endpoint
    // covers the closed interval.
    if (p.deriv(coord[tree.initial_vertex(j)]) <= 0)
      report.violations.push_back({"psi' <= 0 at edge start", -1, j});
    if (p.eval(coord[tree.terminal_vertex(j)]) >= 0)
      report.violations.push_back({"psi >= 0 at edge end", -1, j});
  }
  return report;
}

double theta(double t, double T) { return 1.0 / ((T - t) * (T + t)); }

double theta_dot(double t, double T) {
  const double d = (T - t) * (T + t);
  return 2.0 * t / (d * d);
}

double eval_phi(const TreeGraph& tree, const WeightFamily& family, int j, double x, double t,
                int dx_order, int dt_order) {
  const double T = family.horizon();
  if (!(std::abs(t) < T)) throw std::domain_error("t outside (-T, T)");
  const double lo = tree.x_initial(j), hi = tree.x_terminal(j);
  const double slack = 1e-12 * (1.0 + std::abs(hi));
  if (x < lo - slack || x > hi + slack) throw std::domain_error("x outside edge interval");

  const EdgePoly& p = family.poly(j);
  const double a = to_double(p.a), b = to_double(p.b), c = to_double(p.c);
  double spatial = 0.0;
  switch (dx_order) {
    case 0: spatial = (a * x + b) * x + c; break;
    case 1: spatial = 2.0 * a * x + b; break;
    case 2: spatial = 2.0 * a; break;
    default: throw std::invalid_argument("dx order must be 0..2");
  }
  switch (dt_order) {
    case 0: return theta(t, T) * spatial;
    case 1: return theta_dot(t, T) * spatial;
    default: throw std::invalid_argument("dt order must be 0..1");
  }
}

double vanishing_check(const TreeGraph& tree, const WeightFamily& family, double s, int l,
                       double t_probe, int samples_per_edge) {
  if (!(s > 0.0)) throw std::invalid_argument("vanishing check needs s > 0");
  const double T = family.horizon();
  const double th = theta(t_probe, T);
  double worst = 0.0;
  for (int j = 1; j <= tree.num_edges(); ++j) {
    const double lo = tree.x_initial(j), hi = tree.x_terminal(j);
    for (int i = 0; i < samples_per_edge; ++i) {
      const double x = lo + (hi - lo) * i / (samples_per_edge - 1);
      const double v = std::pow(th, l) * std::exp(2.0 * s * eval_phi(tree, family, j, x, t_probe));
      worst = std::max(worst, v);
    }
  }
  return worst;
}

double choose_clip(const TreeGraph& tree, const WeightFamily& family, double s, double bound) {
  const double T = family.horizon();
  const double m = to_double(max_psi(tree, family));
  if (!(m < 0.0)) throw std::domain_error("family has max psi >= 0; tails do not vanish");
  auto envelope = [&](double th) { return th * th * th * std::exp(2.0 * s * th * m); };
  double th = std::max(1.0 / (T * T) + 1e-12, 1.5 / (s * std::abs(m)));  // past the peak
  while (envelope(th) >= bound) th *= 2.0;
  const double t = std::sqrt(std::max(0.0, T * T - 1.0 / th));
  return T - t;
}

}  // namespace qg

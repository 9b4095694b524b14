#include <doctest.h>

#include <cmath>

#include "qg/carleman.hpp"
#include "test_helpers.hpp"

using namespace qg;
using testing::five_edge_tree;
using testing::single_edge;

namespace {

struct Setup {
  TreeGraph tree;
  GridSpec grid;
  WeightFamily family;
  CarlemanInputs in;
};

GridFunction sample(const TreeGraph& tree, const GridSpec& grid,
                    const std::function<Complex(double)>& f) {
  auto u = GridFunction::zeros(tree, grid);
  for (const auto& e : tree.edges()) {
    auto x = grid.coords(tree, e.id);
    for (int i = 0; i < x.size(); ++i) u.on(e.id)(i) = f(x(i));
  }
  return u;
}

Setup make_setup(int nodes, double omega, double s_min, int time_samples = 129) {
  auto tree = five_edge_tree();
  const double T = 1.0;
  auto grid = GridSpec::uniform(tree, nodes);
  auto family = construct_weights(tree, T, {1, 2, -7});

  ModeSpec spec;
  spec.omega = omega;
  spec.boundary = {{0, Complex(1.0, 0.0)}};
  spec.F = sample(tree, grid, [](double x) { return Complex(std::sin(x) + 0.3, 0.1); });
  auto pot = constant_potential(tree, grid, {-1.0, 0.5, -0.25, 0.75, -0.5});
  auto pair = solve_modal(tree, grid, pot, {spec}, T);

  CarlemanInputs in;
  in.u = pair.u;
  in.f = pair.f;
  in.family = nullptr;  // filled after family is moved into the Setup
  in.clip = choose_clip(tree, family, s_min);
  in.time_samples = time_samples;

  Setup st{std::move(tree), std::move(grid), std::move(family), std::move(in)};
  st.in.family = &st.family;
  return st;
}

}  // namespace

TEST_CASE("clipped time grid is symmetric with the requested endpoints") {
  auto tg = clipped_time_grid(2.0, 0.25, 9);
  REQUIRE(tg.size() == 9);
  CHECK(tg(0) == doctest::Approx(-1.75));
  CHECK(tg(8) == doctest::Approx(1.75));
  CHECK(tg(4) == doctest::Approx(0.0));
  for (int i = 0; i < 4; ++i) CHECK(tg(i) == doctest::Approx(-tg(8 - i)));
}

TEST_CASE("zero solution gives zero functionals and a flagged sweep") {
  auto tree = single_edge(1.0);
  auto grid = GridSpec::uniform(tree, 9);
  auto family = construct_weights(tree, 1.0, {1, 2, -7});
  CarlemanInputs in;
  in.u.T = 1.0;
  in.f.T = 1.0;
  in.family = &family;
  in.clip = choose_clip(tree, family, 1.0);

  CHECK(lhs_functional(tree, grid, in, 1.0) == 0.0);
  CHECK(rhs_data_functional(tree, grid, in, 1.0) == 0.0);
  CHECK(boundary_term(tree, grid, in, 1.0, BoundaryForm::windowed) == 0.0);
  CHECK(boundary_term(tree, grid, in, 1.0, BoundaryForm::static_bound) == 0.0);

  auto report = ratio_sweep(tree, grid, in, {1.0, 2.0});
  REQUIRE(report.rows.size() == 2);
  CHECK(report.rows[0].flagged);
  CHECK(report.rows[0].ratio == 0.0);
}

TEST_CASE("tail certification rejects an insufficient clip") {
  auto st = make_setup(9, 0.0, 5.0);
  // At the window edge t = T - clip the integrand bound theta^3 e^{2 s phi}
  // only drops below 1e-30 once t is close enough to T; a wide clip leaves
  // the uncertified region too large.
  st.in.clip = 0.9;
  CHECK_THROWS_AS(lhs_functional(st.tree, st.grid, st.in, 5.0), std::domain_error);
  st.in.clip = -0.5;
  CHECK_THROWS_AS(lhs_functional(st.tree, st.grid, st.in, 5.0), std::invalid_argument);
}

TEST_CASE("lhs functional matches an independently assembled quadrature") {
  auto st = make_setup(17, M_PI, 2.0, 97);
  const double s = 2.0;
  const double T = st.in.u.T;

  // Same integrand, assembled with plain loops and explicit trapezoid weights.
  const ModalSolution du = st.in.u.derivative(st.tree, st.grid);
  const auto tg = clipped_time_grid(T, st.in.clip, st.in.time_samples);
  const double dt = tg(1) - tg(0);
  double expected = 0.0;
  for (int it = 0; it < tg.size(); ++it) {
    const double t = tg(it), th = theta(t, T);
    const auto ut = st.in.u.eval(st.tree, st.grid, t);
    const auto dut = du.eval(st.tree, st.grid, t);
    double slab = 0.0;
    for (const auto& e : st.tree.edges()) {
      const auto x = st.grid.coords(st.tree, e.id);
      const double h = st.grid.step(e.id);
      for (int i = 0; i < x.size(); ++i) {
        const double phi = eval_phi(st.tree, st.family, e.id, x(i), t);
        const double val = (s * s * s * th * th * th * std::norm(ut.on(e.id)(i)) +
                            s * th * std::norm(dut.on(e.id)(i))) *
                           std::exp(2.0 * s * phi);
        slab += ((i == 0 || i == x.size() - 1) ? 0.5 : 1.0) * h * val;
      }
    }
    expected += ((it == 0 || it == tg.size() - 1) ? 0.5 : 1.0) * dt * slab;
  }

  const double got = lhs_functional(st.tree, st.grid, st.in, s);
  CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  CHECK(got > 0.0);
}

TEST_CASE("per-mode and assembled rhs agree for a single mode") {
  auto st = make_setup(17, M_PI, 2.0, 65);
  const double a = rhs_data_functional(st.tree, st.grid, st.in, 2.0, false);
  const double b = rhs_data_functional(st.tree, st.grid, st.in, 2.0, true);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
  CHECK(a > 0.0);
}

TEST_CASE("functionals are stable under quadrature refinement") {
  auto st = make_setup(17, M_PI, 2.0, 129);
  auto fine = st.in;
  fine.time_samples = 257;
  const double c = lhs_functional(st.tree, st.grid, st.in, 2.0);
  const double f = lhs_functional(st.tree, st.grid, fine, 2.0);
  CHECK(std::abs(c - f) / f < 1e-3);
}

TEST_CASE("static boundary bound is nonnegative") {
  auto st = make_setup(17, 2.0 * M_PI, 2.0, 65);
  CHECK(boundary_term(st.tree, st.grid, st.in, 2.0, BoundaryForm::static_bound) >= 0.0);
}

TEST_CASE("transform_w recovers u after dividing out the weight") {
  auto st = make_setup(9, M_PI, 2.0);
  const double s = 2.0, t = 0.3;
  auto [w1, w2] = transform_w(st.tree, st.grid, st.in.u, st.family, s, t);
  const auto ut = st.in.u.eval(st.tree, st.grid, t);
  double err = 0.0;
  for (const auto& e : st.tree.edges()) {
    const auto x = st.grid.coords(st.tree, e.id);
    for (int i = 0; i < x.size(); ++i) {
      const double es = std::exp(-s * eval_phi(st.tree, st.family, e.id, x(i), t));
      const Complex back = Complex(w1.on(e.id)(i).real(), w2.on(e.id)(i).real()) * es;
      err = std::max(err, std::abs(back - ut.on(e.id)(i)));
    }
  }
  CHECK(err < 1e-12);
  // The weight is strictly damping: psi < 0 everywhere, so |w| < |u|.
  CHECK(w1.sup_norm() < ut.sup_norm());
}

TEST_CASE("ratio sweep validates its s grid") {
  auto st = make_setup(9, 0.0, 1.0);
  CHECK_THROWS_WITH_AS(ratio_sweep(st.tree, st.grid, st.in, {}), "empty sweep",
                       std::invalid_argument);
  CHECK_THROWS_AS(ratio_sweep(st.tree, st.grid, st.in, {2.0, 1.0}), std::invalid_argument);
}

TEST_CASE("ratio sweep yields finite ratios and a threshold inside the grid") {
  auto st = make_setup(17, M_PI, 1.0, 65);
  std::vector<double> s_grid{1, 2, 4, 8, 16};
  auto report = ratio_sweep(st.tree, st.grid, st.in, s_grid);
  REQUIRE(report.rows.size() == s_grid.size());
  for (const auto& row : report.rows) {
    CHECK(std::isfinite(row.ratio));
    CHECK(row.lhs >= 0.0);
    CHECK(row.rhs_data > 0.0);
    CHECK_FALSE(row.flagged);
  }
  CHECK(report.s0 >= s_grid.front());
  CHECK(report.s0 <= s_grid.back());
  CHECK(std::isfinite(report.empirical_c));
  double max_tail = 0.0;
  for (const auto& row : report.rows)
    if (row.s >= report.s0) max_tail = std::max(max_tail, row.ratio);
  CHECK(report.empirical_c == doctest::Approx(max_tail));
}

TEST_CASE("vertex proof terms: identities vanish at O(h^2), signed terms obey the bound") {
  auto tree = five_edge_tree();
  const double T = 1.0;
  auto family = construct_weights(tree, T, {1, 2, -7});
  const double s = 2.0;
  const double clip = choose_clip(tree, family, s);

  auto terms_at = [&](int nodes) {
    auto grid = GridSpec::uniform(tree, nodes);
    ModeSpec spec;
    spec.omega = M_PI / T;
    spec.boundary = {{0, Complex(1.0, 0.0)}};
    spec.F = sample(tree, grid, [](double x) { return Complex(std::sin(x) + 0.3, 0.1); });
    auto pot = constant_potential(tree, grid, {-1.0, 0.5, -0.25, 0.75, -0.5});
    auto pair = solve_modal(tree, grid, pot, {spec}, T);
    CarlemanInputs in;
    in.u = pair.u;
    in.f = pair.f;
    in.family = &family;
    in.clip = clip;
    return std::make_pair(d_terms(tree, grid, in, s), grid.max_step());
  };

  auto [coarse, h] = terms_at(33);
  auto [fine, h2] = terms_at(65);
  REQUIRE(coarse.size() == 2);  // two inner vertices
  for (size_t v = 0; v < coarse.size(); ++v) {
    for (int m : {2, 3}) {
      const double tol = 10.0 * h * h * coarse[v].scale[m];
      CHECK(std::abs(coarse[v].d[m]) <= tol);
      // Exact identities shrink roughly x4 under h -> h/2.
      CHECK(std::abs(fine[v].d[m]) <= 0.5 * std::abs(coarse[v].d[m]) + 1e-14);
    }
    for (int m : {0, 1}) {
      const double tol = 10.0 * h * h * coarse[v].scale[m];
      CHECK(coarse[v].d[m] <= tol);
    }
  }
}

TEST_CASE("certificate passes on a sound scenario and reports structure") {
  auto tree = five_edge_tree();
  auto grid = GridSpec::uniform(tree, 17);
  auto family = construct_weights(tree, 1.0, {1, 2, -7});

  PotentialFactory pot = [&](const GridSpec& g) {
    return constant_potential(tree, g, {-1.0, 0.5, -0.25, 0.75, -0.5});
  };
  ModeSpecFactory specs = [&](const GridSpec& g) {
    ModeSpec spec;
    spec.omega = M_PI;
    spec.boundary = {{0, Complex(1.0, 0.0)}};
    spec.F = sample(tree, g, [](double x) { return Complex(std::sin(x) + 0.3, 0.1); });
    return std::vector<ModeSpec>{spec};
  };

  auto cert = carleman_certify(tree, grid, family, pot, specs, {1, 2, 4, 8});
  INFO(cert.dump(2));
  CHECK(cert["pass"].get<bool>());
  CHECK(cert["checks"].size() > 1);
  CHECK(cert.contains("empirical_C"));
  CHECK(cert.contains("empirical_s0"));

  SUBCASE("empty problem set is a vacuous pass with a warning") {
    ModeSpecFactory none = [](const GridSpec&) { return std::vector<ModeSpec>{}; };
    auto vac = carleman_certify(tree, grid, family, pot, none, {1, 2});
    CHECK(vac["pass"].get<bool>());
    CHECK(vac.contains("warning"));
  }

  SUBCASE("a corrupted weight family fails the condition check") {
    auto broken = family;
    broken.polys()[1].a += 1;
    auto bad = carleman_certify(tree, grid, broken, pot, specs, {1, 2});
    CHECK_FALSE(bad["pass"].get<bool>());
  }
}

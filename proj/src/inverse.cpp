#include "qg/inverse.hpp"

#include <cmath>

namespace qg {

namespace {
const Complex kI(0.0, 1.0);

std::vector<ModeSpec> mode_specs_from(const TreeGraph& tree, const GridSpec& grid,
                                      const ForwardSpec& spec) {
  std::vector<ModeSpec> specs;
  for (size_t mi = 0; mi < spec.mode_numbers.size(); ++mi) {
    ModeSpec ms;
    ms.omega = spec.omega(mi);
    ms.phase = spec.phases.at(mi);
    ms.F = GridFunction::zeros(tree, grid);
    for (const auto& [k, amps] : spec.boundary_amp) ms.boundary[k] = amps.at(mi);
    specs.push_back(std::move(ms));
  }
  return specs;
}

double min_abs(const GridFunction& z) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& v : z.edge) m = std::min(m, v.cwiseAbs().minCoeff());
  return m;
}

// Observed boundary vertices: Pi_1 \ {0} or a caller-provided subset of it.
std::vector<int> observed(const TreeGraph& tree, const std::vector<int>* subset) {
  std::vector<int> ks;
  for (int k : tree.boundary_vertices())
    if (k != 0) ks.push_back(k);
  if (subset) ks = *subset;
  return ks;
}

// d/dt and d^2/dt^2 of a uniformly sampled series, second order everywhere.
Eigen::VectorXcd time_derivative(const Eigen::VectorXcd& v, double dt) {
  const auto n = v.size();
  Eigen::VectorXcd d(n);
  d(0) = (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * dt);
  d.segment(1, n - 2) = (v.segment(2, n - 2) - v.segment(0, n - 2)) / (2.0 * dt);
  d(n - 1) = (3.0 * v(n - 1) - 4.0 * v(n - 2) + v(n - 3)) / (2.0 * dt);
  return d;
}

Eigen::VectorXcd time_second_derivative(const Eigen::VectorXcd& v, double dt) {
  const auto n = v.size();
  Eigen::VectorXcd d(n);
  const double dt2 = dt * dt;
  d(0) = (2.0 * v(0) - 5.0 * v(1) + 4.0 * v(2) - v(3)) / dt2;
  d.segment(1, n - 2) =
      (v.segment(2, n - 2) - 2.0 * v.segment(1, n - 2) + v.segment(0, n - 2)) / dt2;
  d(n - 1) = (2.0 * v(n - 1) - 5.0 * v(n - 2) + 4.0 * v(n - 3) - v(n - 4)) / dt2;
  return d;
}

// (g)'' on one edge, second order including the 4-point one-sided ends.
Eigen::VectorXcd second_space_derivative(const Eigen::VectorXcd& g, double h) {
  const auto n = g.size();
  Eigen::VectorXcd d(n);
  const double h2 = h * h;
  d(0) = (2.0 * g(0) - 5.0 * g(1) + 4.0 * g(2) - g(3)) / h2;
  d.segment(1, n - 2) = (g.segment(2, n - 2) - 2.0 * g.segment(1, n - 2) + g.segment(0, n - 2)) / h2;
  d(n - 1) = (2.0 * g(n - 1) - 5.0 * g(n - 2) + 4.0 * g(n - 3) - g(n - 4)) / h2;
  return d;
}

}  // namespace

std::vector<Eigen::VectorXd> potential_difference(const std::vector<Eigen::VectorXd>& a,
                                                  const std::vector<Eigen::VectorXd>& b) {
  std::vector<Eigen::VectorXd> d;
  for (size_t i = 0; i < a.size(); ++i) d.push_back(a[i] - b[i]);
  return d;
}

SynthesisResult synthesize_forward(const TreeGraph& tree, const GridSpec& grid,
                                   const std::vector<Eigen::VectorXd>& potential,
                                   const ForwardSpec& spec, int time_samples, double r,
                                   double noise_level, unsigned seed) {
  SynthesisResult out;
  out.u = solve_modal(tree, grid, potential, mode_specs_from(tree, grid, spec), spec.T).u;
  out.z = out.u.eval(tree, grid, 0.0);
  out.min_abs_z = min_abs(out.z);
  if (r > 0.0 && out.min_abs_z < r)
    throw AdmissibilityError("initial data violates |z| >= r: min |z| = " +
                                 std::to_string(out.min_abs_z),
                             out.min_abs_z);

  const ModalSolution du = out.u.derivative(tree, grid);
  const Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(time_samples, -spec.T, spec.T);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (int k : observed(tree, nullptr)) {
    Observation obs;
    obs.vertex = k;
    obs.edge = tree.edges_ending_at(k).front();
    obs.times = times;
    obs.d1.resize(times.size());
    obs.d2.resize(times.size());
    const int node = grid.nodes(obs.edge) - 1;
    for (int it = 0; it < times.size(); ++it) {
      Complex v1 = 0, v2 = 0;
      for (const Mode& m : du.modes) {
        const Complex e = m.U.on(obs.edge)(node) * std::exp(-kI * (m.omega * times(it) + m.phase));
        v1 += -kI * m.omega * e;
        v2 += -m.omega * m.omega * e;
      }
      obs.d1(it) = v1;
      obs.d2(it) = v2;
    }
    if (noise_level > 0.0) {
      for (auto* series : {&obs.d1, &obs.d2}) {
        const double rms = std::sqrt(series->cwiseAbs2().mean());
        for (int it = 0; it < series->size(); ++it)
          (*series)(it) += noise_level * rms * Complex(gauss(rng), gauss(rng)) / std::sqrt(2.0);
      }
    }
    out.observations.push_back(std::move(obs));
  }
  return out;
}

DifferencePair make_difference_pair(const TreeGraph& tree, const GridSpec& grid,
                                    const std::vector<Eigen::VectorXd>& p_tilde,
                                    const std::vector<Eigen::VectorXd>& p_hat,
                                    const ForwardSpec& spec, int steps_per_side, double r) {
  DifferencePair pair;
  pair.u_hat = solve_modal(tree, grid, p_hat, mode_specs_from(tree, grid, spec), spec.T).u;
  pair.z = pair.u_hat.eval(tree, grid, 0.0);
  pair.min_abs_z = min_abs(pair.z);
  if (r > 0.0 && pair.min_abs_z < r)
    throw AdmissibilityError("initial data violates |z| >= r: min |z| = " +
                                 std::to_string(pair.min_abs_z),
                             pair.min_abs_z);

  const auto p_bar = potential_difference(p_tilde, p_hat);
  const double dt = spec.T / steps_per_side;
  pair.dt = dt;

  CrankNicolson::SourceFn source = [&](double t) {
    GridFunction f = pair.u_hat.eval(tree, grid, t);
    for (size_t e = 0; e < f.edge.size(); ++e)
      f.edge[e] = -p_bar[e].cast<Complex>().cwiseProduct(f.edge[e]);
    return f;
  };
  CrankNicolson::BoundaryFn boundary = [&](double) {
    std::map<int, Complex> g;
    for (int k : tree.boundary_vertices()) g[k] = 0.0;
    return g;
  };

  const std::vector<int> ks = observed(tree, nullptr);
  const int nt = 2 * steps_per_side + 1;
  std::vector<Eigen::VectorXcd> flux(ks.size(), Eigen::VectorXcd::Zero(nt));
  pair.snapshots.assign(5, GridFunction::zeros(tree, grid));

  auto record = [&](const GridFunction& u, int index) {
    const GridFunction du = spatial_derivative(tree, grid, u);
    for (size_t q = 0; q < ks.size(); ++q) {
      const int j = tree.edges_ending_at(ks[q]).front();
      flux[q](index) = du.on(j)(grid.nodes(j) - 1);
    }
  };

  const GridFunction zero = GridFunction::zeros(tree, grid);
  record(zero, steps_per_side);  // t = 0
  for (const int dir : {+1, -1}) {
    const CrankNicolson stepper(tree, grid, p_tilde, dir * dt);
    GridFunction u = zero;
    for (int n = 0; n < steps_per_side; ++n) {
      u = stepper.step(u, dir * n * dt, source, boundary);
      record(u, steps_per_side + dir * (n + 1));
    }
  }

  // Snapshots around t = 0 for the initial-identity checks. u_bar carries
  // stiff O(1/h^2) frequencies from its pinned boundary, so time differencing
  // only resolves the derivatives at t = 0 when the snapshot step is well
  // below the fastest period. With the fourth-order five-point formulas,
  // dt ~ h^{5/2} keeps that error at the O(h^2) level of the spatial
  // discretization while staying far enough from the dt^-2 rounding floor.
  const double hs = grid.max_step();
  pair.snapshot_dt = std::min(dt, hs * hs * std::sqrt(hs));
  for (const int dir : {+1, -1}) {
    const CrankNicolson stepper(tree, grid, p_tilde, dir * pair.snapshot_dt);
    GridFunction u = zero;
    for (int n = 0; n < 2; ++n) {
      u = stepper.step(u, dir * n * pair.snapshot_dt, source, boundary);
      pair.snapshots[2 + dir * (n + 1)] = u;
    }
  }

  const Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(nt, -spec.T, spec.T);
  for (size_t q = 0; q < ks.size(); ++q) {
    Observation obs;
    obs.vertex = ks[q];
    obs.edge = tree.edges_ending_at(ks[q]).front();
    obs.times = times;
    obs.d1 = time_derivative(flux[q], dt);
    obs.d2 = time_second_derivative(flux[q], dt);
    pair.observations.push_back(std::move(obs));
  }
  return pair;
}

IdentityReport initial_identity_check(const TreeGraph& tree, const GridSpec& grid,
                                      const std::vector<Eigen::VectorXd>& p_tilde,
                                      const std::vector<Eigen::VectorXd>& p_hat,
                                      const DifferencePair& pair) {
  const auto p_bar = potential_difference(p_tilde, p_hat);
  const double dt = pair.snapshot_dt;

  IdentityReport report;
  report.u_bar_zero = pair.snapshots[2].sup_norm();
  if (report.u_bar_zero > 1e-8)
    throw std::invalid_argument("pair does not share initial data: |u_bar(.,0)| = " +
                                std::to_string(report.u_bar_zero));

  // Fourth-order five-point derivatives at the center snapshot (u_bar(.,0)=0).
  const GridFunction ut0 =
      (1.0 / (12.0 * dt)) * (pair.snapshots[0] - 8.0 * pair.snapshots[1] +
                             8.0 * pair.snapshots[3] - pair.snapshots[4]);
  const GridFunction utt0 =
      (1.0 / (12.0 * dt * dt)) *
      (-1.0 * pair.snapshots[0] + 16.0 * pair.snapshots[1] - 30.0 * pair.snapshots[2] +
       16.0 * pair.snapshots[3] - 1.0 * pair.snapshots[4]);

  // The identities are pointwise statements about the PDE on the open edges;
  // at shared vertices p_bar is multivalued and the vertex unknowns follow
  // the coupling constraints instead, so the endpoints are excluded.
  for (int j = 1; j <= tree.num_edges(); ++j) {
    const auto n = grid.nodes(j);
    const auto& z = pair.z.on(j);
    const auto pb = p_bar[j - 1].cast<Complex>();
    const auto pt = p_tilde[j - 1].cast<Complex>();

    const Eigen::VectorXcd first = kI * pb.cwiseProduct(z);
    report.first_residual = std::max(
        report.first_residual, (ut0.on(j) - first).segment(1, n - 2).cwiseAbs().maxCoeff());

    const Eigen::VectorXcd pbz = pb.cwiseProduct(z);
    const Eigen::VectorXcd second = -pb.cwiseProduct(pbz) - pt.cwiseProduct(pbz) -
                                    second_space_derivative(pbz, grid.step(j));
    report.second_residual = std::max(
        report.second_residual, (utt0.on(j) - second).segment(1, n - 2).cwiseAbs().maxCoeff());
  }
  return report;
}

namespace {

PotentialCells zero_cells(const TreeGraph& tree, int n_param) {
  return PotentialCells(tree.num_edges(), Eigen::VectorXd::Zero(n_param));
}

ObservationSet model_observations(const TreeGraph& tree, const GridSpec& grid,
                                  const PotentialCells& candidate, const ObservationSet& data,
                                  const ForwardSpec& spec) {
  const auto nodal = piecewise_potential(tree, grid, candidate);
  const ModalSolution u =
      solve_modal(tree, grid, nodal, mode_specs_from(tree, grid, spec), spec.T).u;
  const ModalSolution du = u.derivative(tree, grid);
  ObservationSet model;
  for (const Observation& obs : data) {
    Observation m_obs = obs;
    const int node = grid.nodes(obs.edge) - 1;
    for (int it = 0; it < obs.times.size(); ++it) {
      Complex v1 = 0, v2 = 0;
      for (const Mode& m : du.modes) {
        const Complex e =
            m.U.on(obs.edge)(node) * std::exp(-kI * (m.omega * obs.times(it) + m.phase));
        v1 += -kI * m.omega * e;
        v2 += -m.omega * m.omega * e;
      }
      m_obs.d1(it) = v1;
      m_obs.d2(it) = v2;
    }
    model.push_back(std::move(m_obs));
  }
  return model;
}

}  // namespace

double misfit(const TreeGraph& tree, const GridSpec& grid, const PotentialCells& candidate,
              const ObservationSet& observations, const ForwardSpec& spec,
              const ReconstructionConfig& config) {
  const ObservationSet model = model_observations(tree, grid, candidate, observations, spec);
  double j = 0.0;
  for (size_t q = 0; q < observations.size(); ++q) {
    const double dt = observations[q].times(1) - observations[q].times(0);
    j += trapezoid((model[q].d1 - observations[q].d1).cwiseAbs2(), dt);
    j += trapezoid((model[q].d2 - observations[q].d2).cwiseAbs2(), dt);
  }
  if (config.lambda > 0.0) {
    const PotentialCells prior = config.prior ? *config.prior : zero_cells(tree, config.n_param);
    for (size_t e = 0; e < candidate.size(); ++e)
      j += config.lambda * (candidate[e] - prior[e]).squaredNorm();
  }
  return j;
}

PotentialEstimate reconstruct(const TreeGraph& tree, const GridSpec& grid,
                              const ObservationSet& observations, const ForwardSpec& spec,
                              const ReconstructionConfig& config) {
  const int n_edges = tree.num_edges();
  PotentialEstimate est;
  est.p = config.prior ? *config.prior : zero_cells(tree, config.n_param);

  auto project = [&](PotentialCells p) {
    for (auto& v : p) v = v.cwiseMax(-config.bound_M).cwiseMin(config.bound_M);
    return p;
  };
  est.p = project(est.p);

  double j0 = misfit(tree, grid, est.p, observations, spec, config);
  est.misfit_history.push_back(j0);

  // Step rule: spectral (Barzilai-Borwein) lengths, diagonally scaled once
  // the iterate is near the minimizer.  Far from the minimizer the plain
  // spectral step is used: strong per-coordinate scaling there lets weakly
  // observed coordinates (cells near the root, seen faintly at the leaf
  // observations) wander outside the basin of attraction.  Once the misfit
  // has dropped well into the locally convex regime, the scaling 1/D_i,
  // with D_i the finite-difference curvature at the current iterate,
  // equalizes the coordinate sensitivities and sharply accelerates the tail
  // of the iteration.  Backtracking from the spectral length keeps the
  // misfit history monotone nonincreasing, and the per-coordinate box
  // projection commutes with the diagonal scaling.
  PotentialCells scale(n_edges, Eigen::VectorXd::Ones(config.n_param));
  const double j_init = j0;
  bool scaled_phase = false;
  auto compute_scale = [&]() {
    double max_curv = 0.0;
    for (int e = 0; e < n_edges; ++e) {
      for (int c = 0; c < config.n_param; ++c) {
        PotentialCells probe = est.p;
        probe[e](c) += config.fd_step;
        const double jp = misfit(tree, grid, probe, observations, spec, config);
        probe[e](c) -= 2.0 * config.fd_step;
        const double jm = misfit(tree, grid, probe, observations, spec, config);
        const double curv = (jp - 2.0 * j0 + jm) / (config.fd_step * config.fd_step);
        scale[e](c) = curv;
        max_curv = std::max(max_curv, curv);
      }
    }
    if (max_curv <= 0.0) max_curv = 1.0;
    for (auto& v : scale)
      for (int c = 0; c < v.size(); ++c)
        v(c) = 1.0 / std::max(v(c), 1e-4 * max_curv);
  };

  PotentialCells prev_p = est.p;
  PotentialCells prev_grad = zero_cells(tree, config.n_param);
  double step = config.initial_step;

  for (int iter = 0; iter < config.max_iter; ++iter) {
    if (!scaled_phase && j0 < 1e-3 * j_init) {
      compute_scale();
      scaled_phase = true;
      step = config.initial_step;
    }

    // Central finite-difference gradient in parameter space.
    PotentialCells grad = zero_cells(tree, config.n_param);
    for (int e = 0; e < n_edges; ++e) {
      for (int c = 0; c < config.n_param; ++c) {
        PotentialCells probe = est.p;
        probe[e](c) += config.fd_step;
        const double jp = misfit(tree, grid, probe, observations, spec, config);
        probe[e](c) -= 2.0 * config.fd_step;
        const double jm = misfit(tree, grid, probe, observations, spec, config);
        grad[e](c) = (jp - jm) / (2.0 * config.fd_step);
      }
    }

    double gnorm2 = 0.0;
    for (const auto& g : grad) gnorm2 += g.squaredNorm();
    if (gnorm2 == 0.0) break;

    if (iter > 0) {
      double sy = 0.0;
      double ydy = 0.0;
      for (int e = 0; e < n_edges; ++e) {
        const Eigen::VectorXd s = est.p[e] - prev_p[e];
        const Eigen::VectorXd y = grad[e] - prev_grad[e];
        sy += s.dot(y);
        ydy += y.dot(scale[e].cwiseProduct(y));
      }
      if (sy > 0.0 && ydy > 0.0) step = sy / ydy;
    }
    prev_p = est.p;
    prev_grad = grad;

    bool accepted = false;
    double length = step;
    for (int bt = 0; bt < 60; ++bt) {
      PotentialCells trial = est.p;
      for (int e = 0; e < n_edges; ++e)
        trial[e] -= length * scale[e].cwiseProduct(grad[e]);
      trial = project(std::move(trial));
      const double jt = misfit(tree, grid, trial, observations, spec, config);
      if (jt < j0) {
        est.p = std::move(trial);
        const double rel = (j0 - jt) / std::max(j0, 1e-300);
        j0 = jt;
        est.misfit_history.push_back(j0);
        accepted = true;
        if (rel < 1e-8) est.converged = true;
        break;
      }
      length *= 0.5;
    }
    if (!accepted) break;  // backtracking exhausted: report last iterate
    if (est.converged) break;
  }
  return est;
}

RatioRow lipschitz_ratio(const TreeGraph& tree, const GridSpec& grid,
                         const std::vector<Eigen::VectorXd>& p_tilde,
                         const std::vector<Eigen::VectorXd>& p_hat, const ForwardSpec& spec,
                         int steps_per_side, double r,
                         const std::vector<int>* observed_vertices) {
  const DifferencePair pair = make_difference_pair(tree, grid, p_tilde, p_hat, spec,
                                                   steps_per_side, r);
  RatioRow row;
  row.min_abs_z = pair.min_abs_z;

  const auto p_bar = potential_difference(p_tilde, p_hat);
  for (int j = 1; j <= tree.num_edges(); ++j)
    row.numerator += trapezoid(p_bar[j - 1].cwiseAbs2(), grid.step(j));

  const std::vector<int> ks = observed(tree, observed_vertices);
  for (const Observation& obs : pair.observations) {
    if (std::find(ks.begin(), ks.end(), obs.vertex) == ks.end()) continue;
    const double dt = obs.times(1) - obs.times(0);
    row.denominator += trapezoid(obs.d1.cwiseAbs2(), dt);
    row.denominator += trapezoid(obs.d2.cwiseAbs2(), dt);
  }
  row.defined = row.denominator > 1e-300;
  row.ratio = row.defined ? row.numerator / row.denominator : 0.0;
  return row;
}

StabilityReport stability_sweep(const TreeGraph& tree, const GridSpec& grid,
                                const ForwardSpec& spec, const SamplerSpec& sampler, int n_pairs,
                                unsigned seed, int steps_per_side,
                                const std::vector<int>* observed_vertices) {
  StabilityReport report;
  report.seed = seed;
  std::mt19937_64 rng(seed);
  // Nonpositive potentials keep the driven m = 0 profile away from zero, so
  // most sampled pairs pass the |z| >= r check.
  std::uniform_real_distribution<double> draw(-sampler.bound_M * sampler.scale, 0.0);

  for (int i = 0; i < n_pairs; ++i) {
    PotentialCells tilde_cells(tree.num_edges()), hat_cells(tree.num_edges());
    for (int e = 0; e < tree.num_edges(); ++e) {
      tilde_cells[e] = Eigen::VectorXd::NullaryExpr(sampler.n_param, [&](int) { return draw(rng); });
      hat_cells[e] = Eigen::VectorXd::NullaryExpr(sampler.n_param, [&](int) { return draw(rng); });
    }
    try {
      const RatioRow row = lipschitz_ratio(tree, grid,
                                           piecewise_potential(tree, grid, tilde_cells),
                                           piecewise_potential(tree, grid, hat_cells), spec,
                                           steps_per_side, sampler.r, observed_vertices);
      report.rows.push_back(row);
      if (row.defined) report.empirical_c = std::max(report.empirical_c, row.ratio);
    } catch (const AdmissibilityError&) {
      ++report.skipped;
    }
  }
  return report;
}

}  // namespace qg

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "qg/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitCheckFailed = 3;

struct Options {
  std::string scenario;
  std::string out = ".";
  unsigned seed = 0;
  bool seed_given = false;
  int threads = 1;
};

json meta(const qg::io::Scenario& sc) {
  return {{"scenario", sc.hash}, {"version", qg::io::kToolVersion}};
}

unsigned effective_seed(const Options& opt, const qg::io::Scenario& sc) {
  return opt.seed_given ? opt.seed : sc.seed;
}

int cmd_weights(const Options& opt) {
  const auto sc = qg::io::parse_scenario(opt.scenario);
  const qg::WeightFamily family =
      qg::construct_weights(sc.graph.tree, sc.graph.T, sc.root_poly, sc.margin);
  const qg::WeightValidation validation = qg::validate_conditions(sc.graph.tree, family);

  qg::io::write_text((fs::path(opt.out) / "weights.json").string(),
                     qg::io::weights_to_json(family).dump(2) + "\n");
  json report = meta(sc);
  report["pass"] = validation.ok();
  report["violations"] = json::array();
  for (const auto& v : validation.violations)
    report["violations"].push_back({{"what", v.what}, {"vertex", v.vertex}, {"edge", v.edge}});
  qg::io::write_text((fs::path(opt.out) / "weights_validation.json").string(),
                     report.dump(2) + "\n");
  return validation.ok() ? kExitOk : kExitCheckFailed;
}

int cmd_forward(const Options& opt) {
  const auto sc = qg::io::parse_scenario(opt.scenario);
  const qg::GridSpec grid = qg::GridSpec::uniform(sc.graph.tree, sc.nodes_per_edge);
  const auto potential = qg::io::potential_from_scenario(sc.graph.tree, grid, sc);
  const qg::ForwardSpec spec = qg::io::forward_spec_from_scenario(sc);
  if (spec.mode_numbers.empty()) throw std::invalid_argument("forward: no modes in scenario");

  const double noise = sc.inverse.is_object() ? sc.inverse.value("noise", 0.0) : 0.0;
  const auto synth = qg::synthesize_forward(sc.graph.tree, grid, potential, spec,
                                            sc.time_samples, 0.0, noise, effective_seed(opt, sc));
  qg::io::write_observations_csv((fs::path(opt.out) / "observations.csv").string(), sc,
                                 synth.observations);
  json summary = meta(sc);
  summary["min_abs_z"] = synth.min_abs_z;
  summary["modes"] = spec.mode_numbers;
  qg::io::write_text((fs::path(opt.out) / "forward_summary.json").string(),
                     summary.dump(2) + "\n");
  return kExitOk;
}

int cmd_carleman(const Options& opt) {
  const auto sc = qg::io::parse_scenario(opt.scenario);
  if (sc.s_grid.empty()) throw std::invalid_argument("empty sweep: no s grid in scenario");
  const qg::GridSpec grid = qg::GridSpec::uniform(sc.graph.tree, sc.nodes_per_edge);
  const qg::WeightFamily family =
      qg::construct_weights(sc.graph.tree, sc.graph.T, sc.root_poly, sc.margin);
  const qg::WeightValidation validation = qg::validate_conditions(sc.graph.tree, family);
  if (!validation.ok()) throw std::invalid_argument("weights fail validation");

  qg::PotentialFactory potential = [&](const qg::GridSpec& g) {
    return qg::io::potential_from_scenario(sc.graph.tree, g, sc);
  };
  qg::ModeSpecFactory specs = [&](const qg::GridSpec& g) {
    return qg::io::mode_specs_from_scenario(sc.graph.tree, g, sc);
  };

  json cert = qg::carleman_certify(sc.graph.tree, grid, family, potential, specs, sc.s_grid);
  cert.update(meta(sc));
  qg::io::write_text((fs::path(opt.out) / "certificate.json").string(), cert.dump(2) + "\n");

  qg::CarlemanInputs in;
  const auto mp =
      qg::solve_modal(sc.graph.tree, grid, potential(grid), specs(grid), sc.graph.T);
  in.u = mp.u;
  in.f = mp.f;
  in.family = &family;
  in.time_samples = sc.time_samples;
  in.clip = qg::choose_clip(sc.graph.tree, family, sc.s_grid.front());
  const qg::CarlemanReport report = qg::ratio_sweep(sc.graph.tree, grid, in, sc.s_grid);
  qg::io::write_sweep_csv((fs::path(opt.out) / "carleman_report.csv").string(), sc, report);

  return cert["pass"].get<bool>() ? kExitOk : kExitCheckFailed;
}

int cmd_invert(const Options& opt) {
  const auto sc = qg::io::parse_scenario(opt.scenario);
  const qg::GridSpec grid = qg::GridSpec::uniform(sc.graph.tree, sc.nodes_per_edge);
  const qg::ForwardSpec spec = qg::io::forward_spec_from_scenario(sc);
  const json& inv = sc.inverse;
  if (!inv.is_object()) throw std::invalid_argument("scenario has no inverse section");

  qg::ReconstructionConfig config;
  config.lambda = inv.value("lambda", 0.0);
  config.max_iter = inv.value("max_iter", 500);
  config.n_param = inv.value("n_param", 1);
  config.bound_M = inv.value("M", 5.0);

  qg::PotentialCells truth(sc.graph.tree.num_edges(),
                           Eigen::VectorXd::Zero(config.n_param));
  if (inv.contains("truth")) {
    const auto rows = inv["truth"].get<std::vector<std::vector<double>>>();
    for (int e = 0; e < sc.graph.tree.num_edges(); ++e)
      truth[e] = Eigen::Map<const Eigen::VectorXd>(rows.at(e).data(), rows.at(e).size());
  }

  const auto synth = qg::synthesize_forward(
      sc.graph.tree, grid, qg::piecewise_potential(sc.graph.tree, grid, truth), spec,
      sc.time_samples, 0.0, inv.value("noise", 0.0), effective_seed(opt, sc));
  const qg::PotentialEstimate est =
      qg::reconstruct(sc.graph.tree, grid, synth.observations, spec, config);

  double num = 0.0, den = 0.0;
  for (int e = 0; e < sc.graph.tree.num_edges(); ++e) {
    num += (est.p[e] - truth[e]).squaredNorm();
    den += truth[e].squaredNorm();
  }
  const double rel_error = den > 0 ? std::sqrt(num / den) : std::sqrt(num);

  std::ostringstream csv;
  csv << qg::io::self_describing_header(sc) << "edge,cell,estimate,truth\n";
  csv.precision(17);
  for (int e = 0; e < sc.graph.tree.num_edges(); ++e)
    for (int c = 0; c < config.n_param; ++c)
      csv << (e + 1) << ',' << c << ',' << est.p[e](c) << ',' << truth[e](c) << '\n';
  qg::io::write_text((fs::path(opt.out) / "estimate.csv").string(), csv.str());

  json summary = meta(sc);
  summary["relative_l2_error"] = rel_error;
  summary["iterations"] = est.misfit_history.size() - 1;
  summary["final_misfit"] = est.misfit_history.back();
  summary["converged"] = est.converged;
  qg::io::write_text((fs::path(opt.out) / "invert_summary.json").string(),
                     summary.dump(2) + "\n");
  return kExitOk;
}

int cmd_stability(const Options& opt) {
  const auto sc = qg::io::parse_scenario(opt.scenario);
  const qg::GridSpec grid = qg::GridSpec::uniform(sc.graph.tree, sc.nodes_per_edge);
  const qg::ForwardSpec spec = qg::io::forward_spec_from_scenario(sc);
  const json& inv = sc.inverse;
  if (!inv.is_object()) throw std::invalid_argument("scenario has no inverse section");

  qg::SamplerSpec sampler;
  sampler.bound_M = inv.value("M", 1.0);
  sampler.n_param = inv.value("n_param", 1);
  sampler.r = inv.value("r", 0.0);
  sampler.scale = inv.value("scale", 1.0);
  const int n_pairs = inv.value("n_pairs", 0);
  const int steps = inv.value("steps_per_side", 200);

  const qg::StabilityReport report = qg::stability_sweep(
      sc.graph.tree, grid, spec, sampler, n_pairs, effective_seed(opt, sc), steps);
  qg::io::write_stability_csv((fs::path(opt.out) / "stability.csv").string(), sc, report);

  json summary = meta(sc);
  summary["empirical_C"] = report.empirical_c;
  summary["n_pairs"] = static_cast<int>(report.rows.size());
  summary["skipped"] = report.skipped;
  summary["seed"] = report.seed;
  qg::io::write_text((fs::path(opt.out) / "stability_summary.json").string(),
                     summary.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Carleman-estimate laboratory for the Schrodinger equation on metric trees"};
  app.require_subcommand(1);

  Options opt;
  app.add_option("--scenario", opt.scenario, "Scenario JSON file")->required();
  app.add_option("--out", opt.out, "Output directory");
  app.add_option("--seed", opt.seed, "Override the scenario seed")
      ->each([&](const std::string&) { opt.seed_given = true; });
  app.add_option("--threads", opt.threads, "Worker threads (advisory)");

  auto* weights = app.add_subcommand("weights", "Construct and validate the weight family");
  auto* forward = app.add_subcommand("forward", "Synthesize forward data and observations");
  auto* carleman = app.add_subcommand("carleman", "Run the Carleman sweep and certificate");
  auto* invert = app.add_subcommand("invert", "Inverse-crime potential reconstruction");
  auto* stability = app.add_subcommand("stability", "Empirical Lipschitz stability sweep");
  // The shared options live on the parent; let them match after a subcommand.
  for (auto* sub : {weights, forward, carleman, invert, stability}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(opt.out);
    if (weights->parsed()) return cmd_weights(opt);
    if (forward->parsed()) return cmd_forward(opt);
    if (carleman->parsed()) return cmd_carleman(opt);
    if (invert->parsed()) return cmd_invert(opt);
    if (stability->parsed()) return cmd_stability(opt);
  } catch (const std::ios_base::failure& err) {
    std::cout << json{{"error", err.what()}, {"kind", "io"}}.dump() << std::endl;
    return kExitIo;
  } catch (const nlohmann::json::exception& err) {
    std::cout << json{{"error", err.what()}, {"kind", "invalid_input"}}.dump() << std::endl;
    return kExitInvalid;
  } catch (const qg::TreeError& err) {
    std::cout << json{{"error", err.what()}, {"kind", "invalid_input"}}.dump() << std::endl;
    return kExitInvalid;
  } catch (const qg::AdmissibilityError& err) {
    std::cout << json{{"error", err.what()}, {"kind", "invalid_input"}}.dump() << std::endl;
    return kExitInvalid;
  } catch (const std::invalid_argument& err) {
    std::cout << json{{"error", err.what()}, {"kind", "invalid_input"}}.dump() << std::endl;
    return kExitInvalid;
  } catch (const std::domain_error& err) {
    std::cout << json{{"error", err.what()}, {"kind", "invalid_input"}}.dump() << std::endl;
    return kExitInvalid;
  } catch (const std::exception& err) {
    std::cout << json{{"error", err.what()}, {"kind", "check_failure"}}.dump() << std::endl;
    return kExitCheckFailed;
  }
  return kExitOk;
}

#pragma once

#include <json.hpp>

#include "qg/inverse.hpp"
#include "qg/carleman.hpp"
#include "qg/weights.hpp"

namespace qg::io {

using nlohmann::json;

/// Graph document { "T": number, "edges": [{"id", "parent", "child",
/// "length"}] }; unknown fields rejected.
struct GraphDocument {
  double T = 1.0;
  TreeGraph tree;
};
GraphDocument parse_graph(const json& doc);
json graph_to_json(const GraphDocument& doc);

/// Weight family document { "T": number, "polys": [{"edge", "a", "b", "c"}] }
/// with each coefficient either a plain number or an exact [num, den] pair.
json weights_to_json(const WeightFamily& family);
WeightFamily parse_weights(const json& doc);

json rational_to_json(const Rational& r);
Rational rational_from_json(const json& v);

/// Per-mode source registry: {"type": "zero"} | {"type": "sin", "coeffs":
/// [A, k, b]} (A sin(k x + b)) | {"type": "poly", "coeffs": [c0, c1, ...]}.
GridFunction make_source(const TreeGraph& tree, const GridSpec& grid, const json& spec);

/// Scenario: graph + weight spec + problem spec + carleman/inverse configs.
struct Scenario {
  GraphDocument graph;
  EdgePoly root_poly{1, 2, -7};
  Rational margin = 1;
  int nodes_per_edge = 33;
  std::vector<double> potential_per_edge;  // constants; empty means zero
  std::vector<json> mode_docs;             // [{"m", "phase", "boundary", "source"}]
  std::vector<double> s_grid;
  int time_samples = 257;
  json inverse;  // forwarded to the inverse commands
  unsigned seed = 0;
  std::string hash;  // of the scenario file bytes
};
Scenario parse_scenario(const std::string& path);

ForwardSpec forward_spec_from_scenario(const Scenario& sc);
std::vector<ModeSpec> mode_specs_from_scenario(const TreeGraph& tree, const GridSpec& grid,
                                               const Scenario& sc);
std::vector<Eigen::VectorXd> potential_from_scenario(const TreeGraph& tree, const GridSpec& grid,
                                                     const Scenario& sc);

void write_text(const std::string& path, const std::string& text);
std::string self_describing_header(const Scenario& sc);  // "# scenario=<hash> version=<v>"

void write_sweep_csv(const std::string& path, const Scenario& sc, const CarlemanReport& report);
void write_observations_csv(const std::string& path, const Scenario& sc,
                            const ObservationSet& observations);
void write_stability_csv(const std::string& path, const Scenario& sc,
                         const StabilityReport& report);

extern const char* const kToolVersion;

}  // namespace qg::io

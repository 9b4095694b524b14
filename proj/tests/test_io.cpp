#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "qg/io.hpp"
#include "test_helpers.hpp"

using namespace qg;
using nlohmann::json;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& text) {
    path = std::string(std::tmpnam(nullptr)) + ".json";
    std::ofstream out(path);
    out << text;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

const char* kScenarioText = R"({
  "graph": {
    "T": 1.0,
    "edges": [
      {"id": 1, "parent": 0, "child": 1, "length": 1.0},
      {"id": 2, "parent": 1, "child": 2, "length": 1.0},
      {"id": 3, "parent": 1, "child": 3, "length": 1.0},
      {"id": 4, "parent": 2, "child": 4, "length": 1.0},
      {"id": 5, "parent": 2, "child": 5, "length": 1.0}
    ]
  },
  "weights": {"root": {"a": 1, "b": 2, "c": -7}, "margin": [1, 2]},
  "problem": {
    "nodes_per_edge": 17,
    "potential": [-1.0, 0.5, -0.25, 0.75, -0.5],
    "modes": [
      {"m": 1, "phase": 0.1, "boundary": {"0": 1.0},
       "source": {"type": "sin", "coeffs": [1.0, 2.0, 0.3]}}
    ]
  },
  "carleman": {"s_grid": {"from": 1, "to": 8, "count": 4}, "time_samples": 129},
  "inverse": {"r": 0.05},
  "seed": 11
})";

}  // namespace

TEST_CASE("graph documents round-trip and reject unknown fields") {
  json doc = {{"T", 2.0},
              {"edges", {{{"id", 1}, {"parent", 0}, {"child", 1}, {"length", 1.5}}}}};
  auto g = io::parse_graph(doc);
  CHECK(g.T == 2.0);
  CHECK(g.tree.num_edges() == 1);
  CHECK(g.tree.edges()[0].length == 1.5);
  CHECK(io::parse_graph(io::graph_to_json(g)).tree.num_edges() == 1);

  doc["color"] = "green";
  CHECK_THROWS_AS(io::parse_graph(doc), std::invalid_argument);
  doc.erase("color");
  doc["edges"][0]["weight"] = 1.0;
  CHECK_THROWS_AS(io::parse_graph(doc), std::invalid_argument);
  CHECK_THROWS_AS(io::parse_graph({{"T", -1.0}, {"edges", json::array()}}),
                  std::invalid_argument);
}

TEST_CASE("rationals serialize exactly, including big values") {
  CHECK(io::rational_to_json(Rational(-23, 4)) == json::array({-23, 4}));
  CHECK(io::rational_from_json(json::array({-23, 4})) == Rational(-23, 4));
  CHECK(io::rational_from_json(json(0.25)) == Rational(1, 4));

  // A denominator beyond int64 survives via decimal strings.
  Rational big(1, boost::multiprecision::pow(boost::multiprecision::cpp_int(10), 30));
  CHECK(io::rational_from_json(io::rational_to_json(big)) == big);
  CHECK_THROWS_AS(io::rational_from_json(json("x")), std::invalid_argument);
}

TEST_CASE("weight families round-trip through json") {
  auto tree = testing::five_edge_tree();
  auto family = construct_weights(tree, 1.0, {1, 2, -7});
  auto back = io::parse_weights(io::weights_to_json(family));
  CHECK(back.horizon() == family.horizon());
  REQUIRE(back.num_edges() == family.num_edges());
  for (int j = 1; j <= family.num_edges(); ++j) {
    CHECK(back.poly(j).a == family.poly(j).a);
    CHECK(back.poly(j).b == family.poly(j).b);
    CHECK(back.poly(j).c == family.poly(j).c);
  }
}

TEST_CASE("source registry covers zero, sin and poly") {
  auto tree = testing::single_edge(1.0);
  auto grid = GridSpec::uniform(tree, 5);

  auto zero = io::make_source(tree, grid, {{"type", "zero"}});
  CHECK(zero.sup_norm() == 0.0);

  auto s = io::make_source(tree, grid, {{"type", "sin"}, {"coeffs", {2.0, 3.0, 0.5}}});
  CHECK(s.on(1)(2).real() == doctest::Approx(2.0 * std::sin(3.0 * 0.5 + 0.5)));

  auto p = io::make_source(tree, grid, {{"type", "poly"}, {"coeffs", {1.0, -2.0, 4.0}}});
  CHECK(p.on(1)(4).real() == doctest::Approx(1.0 - 2.0 + 4.0));

  CHECK_THROWS_AS(io::make_source(tree, grid, {{"type", "gauss"}}), std::invalid_argument);
}

TEST_CASE("scenario files parse into a full configuration") {
  TempFile file(kScenarioText);
  auto sc = io::parse_scenario(file.path);

  CHECK(sc.graph.tree.num_edges() == 5);
  CHECK(sc.root_poly.a == 1);
  CHECK(sc.margin == Rational(1, 2));
  CHECK(sc.nodes_per_edge == 17);
  CHECK(sc.potential_per_edge.size() == 5);
  CHECK(sc.time_samples == 129);
  REQUIRE(sc.s_grid.size() == 4);
  CHECK(sc.s_grid.front() == doctest::Approx(1.0));
  CHECK(sc.s_grid.back() == doctest::Approx(8.0));
  CHECK(sc.seed == 11);
  CHECK_FALSE(sc.hash.empty());
  CHECK(sc.inverse.at("r").get<double>() == doctest::Approx(0.05));

  auto spec = io::forward_spec_from_scenario(sc);
  CHECK(spec.mode_numbers == std::vector<int>{1});
  CHECK(spec.omega(0) == doctest::Approx(M_PI));
  CHECK(spec.boundary_amp.at(0).at(0) == doctest::Approx(1.0));

  auto grid = GridSpec::uniform(sc.graph.tree, sc.nodes_per_edge);
  auto specs = io::mode_specs_from_scenario(sc.graph.tree, grid, sc);
  REQUIRE(specs.size() == 1);
  CHECK(specs[0].omega == doctest::Approx(M_PI));
  CHECK(specs[0].F.sup_norm() > 0.0);
  auto pot = io::potential_from_scenario(sc.graph.tree, grid, sc);
  CHECK(pot[0](0) == doctest::Approx(-1.0));

  CHECK_THROWS_AS(io::parse_scenario("/nonexistent/path.json"), std::ios_base::failure);
}

TEST_CASE("csv writers emit the self-describing header and column row") {
  TempFile file(kScenarioText);
  auto sc = io::parse_scenario(file.path);

  CarlemanReport report;
  report.rows.push_back({1.0, 2.0, 3.0, 0.5, 0.25, 0.57, false});
  const std::string path = std::string(std::tmpnam(nullptr)) + ".csv";
  io::write_sweep_csv(path, sc, report);

  std::ifstream in(path);
  std::string header, columns, row;
  std::getline(in, header);
  std::getline(in, columns);
  std::getline(in, row);
  CHECK(header == "# scenario=" + sc.hash + " version=" + io::kToolVersion);
  CHECK(columns == "s,lhs,rhs_data,B_windowed,B_static,ratio,flagged");
  CHECK(row.substr(0, 2) == "1,");
  std::remove(path.c_str());
}

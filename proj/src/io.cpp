#include "qg/io.hpp"

#include <fstream>
#include <sstream>

namespace qg::io {

const char* const kToolVersion = "0.1.0";

namespace {

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw std::invalid_argument("unknown field \"" + key + "\" in " + where);
  }
}

}  // namespace

GraphDocument parse_graph(const json& doc) {
  reject_unknown(doc, {"T", "edges"}, "graph document");
  GraphDocument g;
  g.T = doc.at("T").get<double>();
  if (!(g.T > 0.0)) throw std::invalid_argument("graph document: T must be positive");
  std::vector<Edge> edges;
  for (const json& e : doc.at("edges")) {
    reject_unknown(e, {"id", "parent", "child", "length"}, "edge entry");
    edges.push_back({e.at("id").get<int>(), e.at("parent").get<int>(), e.at("child").get<int>(),
                     e.at("length").get<double>()});
  }
  g.tree = TreeGraph::build(edges);
  return g;
}

json graph_to_json(const GraphDocument& doc) {
  json edges = json::array();
  for (const Edge& e : doc.tree.edges())
    edges.push_back({{"id", e.id}, {"parent", e.parent}, {"child", e.child}, {"length", e.length}});
  return {{"T", doc.T}, {"edges", edges}};
}

json rational_to_json(const Rational& r) {
  const auto num = boost::multiprecision::numerator(r);
  const auto den = boost::multiprecision::denominator(r);
  // Exact int64 pairs when possible, decimal strings otherwise.
  json jn, jd;
  if (num >= std::numeric_limits<long long>::min() && num <= std::numeric_limits<long long>::max())
    jn = static_cast<long long>(num);
  else
    jn = num.str();
  if (den <= std::numeric_limits<long long>::max())
    jd = static_cast<long long>(den);
  else
    jd = den.str();
  return json::array({jn, jd});
}

Rational rational_from_json(const json& v) {
  if (v.is_number()) return rational_from_double(v.get<double>());
  if (v.is_array() && v.size() == 2) {
    auto part = [](const json& x) -> boost::multiprecision::cpp_int {
      if (x.is_string()) return boost::multiprecision::cpp_int(x.get<std::string>());
      return boost::multiprecision::cpp_int(x.get<long long>());
    };
    return Rational(part(v[0]), part(v[1]));
  }
  throw std::invalid_argument("rational must be a number or a [num, den] pair");
}

json weights_to_json(const WeightFamily& family) {
  json polys = json::array();
  for (int j = 1; j <= family.num_edges(); ++j) {
    const EdgePoly& p = family.poly(j);
    polys.push_back({{"edge", j},
                     {"a", rational_to_json(p.a)},
                     {"b", rational_to_json(p.b)},
                     {"c", rational_to_json(p.c)}});
  }
  return {{"T", family.horizon()}, {"polys", polys}};
}

WeightFamily parse_weights(const json& doc) {
  reject_unknown(doc, {"T", "polys"}, "weight document");
  const auto& polys_doc = doc.at("polys");
  std::vector<EdgePoly> polys(polys_doc.size());
  for (const json& p : polys_doc) {
    reject_unknown(p, {"edge", "a", "b", "c"}, "poly entry");
    const int j = p.at("edge").get<int>();
    polys.at(j - 1) = {rational_from_json(p.at("a")), rational_from_json(p.at("b")),
                       rational_from_json(p.at("c"))};
  }
  return WeightFamily(std::move(polys), doc.at("T").get<double>());
}

GridFunction make_source(const TreeGraph& tree, const GridSpec& grid, const json& spec) {
  GridFunction f = GridFunction::zeros(tree, grid);
  const std::string type = spec.value("type", "zero");
  if (type == "zero") return f;
  const std::vector<double> coeffs = spec.value("coeffs", std::vector<double>{});
  for (int j = 1; j <= tree.num_edges(); ++j) {
    const Eigen::VectorXd x = grid.coords(tree, j);
    for (int i = 0; i < x.size(); ++i) {
      if (type == "sin") {
        const double a = coeffs.size() > 0 ? coeffs[0] : 1.0;
        const double k = coeffs.size() > 1 ? coeffs[1] : 1.0;
        const double b = coeffs.size() > 2 ? coeffs[2] : 0.0;
        f.on(j)(i) = a * std::sin(k * x(i) + b);
      } else if (type == "poly") {
        double v = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) v = v * x(i) + *it;
        f.on(j)(i) = v;
      } else {
        throw std::invalid_argument("unknown source type \"" + type + "\"");
      }
    }
  }
  return f;
}

Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("input not found: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const json doc = json::parse(text);

  Scenario sc;
  std::ostringstream hex;
  hex << std::hex << std::hash<std::string>{}(text);
  sc.hash = hex.str();

  sc.graph = parse_graph(doc.at("graph"));
  if (doc.contains("weights")) {
    const json& w = doc["weights"];
    if (w.contains("root")) {
      sc.root_poly = {rational_from_json(w["root"].at("a")), rational_from_json(w["root"].at("b")),
                      rational_from_json(w["root"].at("c"))};
    }
    if (w.contains("margin")) sc.margin = rational_from_json(w["margin"]);
  }
  if (doc.contains("problem")) {
    const json& p = doc["problem"];
    sc.nodes_per_edge = p.value("nodes_per_edge", 33);
    sc.potential_per_edge = p.value("potential", std::vector<double>{});
    if (p.contains("modes")) sc.mode_docs = p["modes"].get<std::vector<json>>();
  }
  if (doc.contains("carleman")) {
    const json& c = doc["carleman"];
    sc.time_samples = c.value("time_samples", 257);
    if (c.contains("s_grid")) {
      if (c["s_grid"].is_array()) {
        sc.s_grid = c["s_grid"].get<std::vector<double>>();
      } else {
        const double from = c["s_grid"].at("from").get<double>();
        const double to = c["s_grid"].at("to").get<double>();
        const int count = c["s_grid"].at("count").get<int>();
        for (int i = 0; i < count; ++i)
          sc.s_grid.push_back(from + (to - from) * (count == 1 ? 0 : double(i) / (count - 1)));
      }
    }
  }
  if (doc.contains("inverse")) sc.inverse = doc["inverse"];
  sc.seed = doc.value("seed", 0u);
  return sc;
}

ForwardSpec forward_spec_from_scenario(const Scenario& sc) {
  ForwardSpec spec;
  spec.T = sc.graph.T;
  for (const json& m : sc.mode_docs) {
    spec.mode_numbers.push_back(m.at("m").get<int>());
    spec.phases.push_back(m.value("phase", 0.0));
    if (m.contains("boundary")) {
      for (const auto& [key, value] : m["boundary"].items()) {
        auto& amps = spec.boundary_amp[std::stoi(key)];
        amps.resize(spec.mode_numbers.size(), 0.0);
        amps.back() = value.get<double>();
      }
    }
  }
  for (auto& [k, amps] : spec.boundary_amp) amps.resize(spec.mode_numbers.size(), 0.0);
  return spec;
}

std::vector<ModeSpec> mode_specs_from_scenario(const TreeGraph& tree, const GridSpec& grid,
                                               const Scenario& sc) {
  std::vector<ModeSpec> specs;
  const double T = sc.graph.T;
  for (const json& m : sc.mode_docs) {
    ModeSpec ms;
    ms.omega = m.at("m").get<int>() * M_PI / T;
    ms.phase = m.value("phase", 0.0);
    ms.F = make_source(tree, grid, m.contains("source") ? m["source"] : json{{"type", "zero"}});
    if (m.contains("boundary"))
      for (const auto& [key, value] : m["boundary"].items())
        ms.boundary[std::stoi(key)] = value.get<double>();
    specs.push_back(std::move(ms));
  }
  return specs;
}

std::vector<Eigen::VectorXd> potential_from_scenario(const TreeGraph& tree, const GridSpec& grid,
                                                     const Scenario& sc) {
  std::vector<double> values = sc.potential_per_edge;
  values.resize(tree.num_edges(), 0.0);
  return constant_potential(tree, grid, values);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write " + path);
  out << text;
}

std::string self_describing_header(const Scenario& sc) {
  return "# scenario=" + sc.hash + " version=" + kToolVersion + "\n";
}

void write_sweep_csv(const std::string& path, const Scenario& sc, const CarlemanReport& report) {
  std::ostringstream out;
  out << self_describing_header(sc);
  out << "s,lhs,rhs_data,B_windowed,B_static,ratio,flagged\n";
  out.precision(17);
  for (const SweepRow& r : report.rows)
    out << r.s << ',' << r.lhs << ',' << r.rhs_data << ',' << r.b_windowed << ','
        << r.b_static << ',' << r.ratio << ',' << (r.flagged ? 1 : 0) << '\n';
  write_text(path, out.str());
}

void write_observations_csv(const std::string& path, const Scenario& sc,
                            const ObservationSet& observations) {
  std::ostringstream out;
  out << self_describing_header(sc);
  out << "vertex,edge,m,t,re,im\n";
  out.precision(17);
  for (const Observation& obs : observations) {
    for (int m = 1; m <= 2; ++m) {
      const auto& series = m == 1 ? obs.d1 : obs.d2;
      for (int it = 0; it < obs.times.size(); ++it)
        out << obs.vertex << ',' << obs.edge << ',' << m << ',' << obs.times(it) << ','
            << series(it).real() << ',' << series(it).imag() << '\n';
    }
  }
  write_text(path, out.str());
}

void write_stability_csv(const std::string& path, const Scenario& sc,
                         const StabilityReport& report) {
  std::ostringstream out;
  out << self_describing_header(sc);
  out << "pair,numerator,denominator,ratio,defined,min_abs_z\n";
  out.precision(17);
  for (size_t i = 0; i < report.rows.size(); ++i) {
    const RatioRow& r = report.rows[i];
    out << i << ',' << r.numerator << ',' << r.denominator << ',' << r.ratio << ','
        << (r.defined ? 1 : 0) << ',' << r.min_abs_z << '\n';
  }
  write_text(path, out.str());
}

}  // namespace qg::io

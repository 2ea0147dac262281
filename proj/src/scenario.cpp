#include "carbonclear/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "carbonclear/errors.hpp"
#include "carbonclear/rng.hpp"

namespace carbonclear {

namespace {

using nlohmann::json;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    throw ParseError(path + ": missing column '" + name + "'");
  }

  const std::string& cell(std::size_t row, int c) const {
    return rows[row][c];
  }

  double num(std::size_t row, int c) const {
    const std::string& s = rows[row][c];
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(row + 2) + ": column '" +
                       header[c] + "': cannot parse number from '" + s + "'");
    }
  }
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(ch);
    }
  }
  out.push_back(trim(field));
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  CsvTable t;
  t.path = path;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
    } else {
      fields.resize(t.header.size());
      t.rows.push_back(std::move(fields));
    }
  }
  if (t.header.empty()) throw ParseError(path + ": empty file");
  return t;
}

// Numeric-aware bus id ordering so "101" sorts before "325".
bool bus_id_less(const std::string& a, const std::string& b) {
  char* enda = nullptr;
  char* endb = nullptr;
  const double na = std::strtod(a.c_str(), &enda);
  const double nb = std::strtod(b.c_str(), &endb);
  const bool numa = enda && *enda == '\0' && !a.empty();
  const bool numb = endb && *endb == '\0' && !b.empty();
  if (numa && numb) return na < nb;
  if (numa != numb) return numa;
  return a < b;
}

}  // namespace

double EmissionIntensityTable::lookup(const std::string& fuel) const {
  const auto it = by_fuel.find(lower(fuel));
  if (it != by_fuel.end()) return it->second;
  if (default_intensity) return *default_intensity;
  throw InputError("unknown fuel type '" + fuel +
                   "' and no default emission intensity configured");
}

EmissionIntensityTable default_intensity_table() {
  EmissionIntensityTable t;
  t.by_fuel = {{"natural gas", 0.6042}, {"ng", 0.6042},  {"gas", 0.6042},
               {"oil", 0.7434},         {"coal", 0.9606}, {"wind", 0.0},
               {"solar", 0.0},          {"hydro", 0.0},   {"nuclear", 0.0},
               {"storage", 0.0}};
  return t;
}

UtilitySpec UtilitySpec::constant(double v) {
  UtilitySpec s;
  s.kind = Kind::Constant;
  s.value = v;
  return s;
}

UtilitySpec UtilitySpec::uniform(double lo, double hi, std::uint64_t seed) {
  UtilitySpec s;
  s.kind = Kind::UniformRange;
  s.lo = lo;
  s.hi = hi;
  s.seed = seed;
  return s;
}

UtilitySpec UtilitySpec::from_file(std::string path) {
  UtilitySpec s;
  s.kind = Kind::PerConsumerFile;
  s.path = std::move(path);
  return s;
}

UtilitySpec UtilitySpec::parse(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  try {
    if (parts.size() == 2 && parts[0] == "const") {
      return constant(std::stod(parts[1]));
    }
    if (parts.size() == 4 && parts[0] == "uniform") {
      return uniform(std::stod(parts[1]), std::stod(parts[2]),
                     std::stoull(parts[3]));
    }
    if (parts.size() >= 2 && parts[0] == "file") {
      return from_file(text.substr(5));
    }
  } catch (const std::exception&) {
  }
  throw InputError("cannot parse utility spec '" + text +
                   "'; expected const:V, uniform:LO:HI:SEED or file:PATH");
}

std::string UtilitySpec::to_string() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Constant:
      os << "const:" << value;
      break;
    case Kind::UniformRange:
      os << "uniform:" << lo << ":" << hi << ":" << seed;
      break;
    case Kind::PerConsumerFile:
      os << "file:" << path;
      break;
  }
  return os.str();
}

std::vector<double> assign_utilities(const std::vector<Consumer>& consumers,
                                     const UtilitySpec& spec) {
  std::vector<double> out(consumers.size(), 0.0);
  switch (spec.kind) {
    case UtilitySpec::Kind::Constant:
      std::fill(out.begin(), out.end(), spec.value);
      break;
    case UtilitySpec::Kind::UniformRange: {
      if (spec.hi < spec.lo) {
        throw InputError("utility range is inverted");
      }
      Rng rng(spec.seed);
      for (double& u : out) u = rng.uniform(spec.lo, spec.hi);
      break;
    }
    case UtilitySpec::Kind::PerConsumerFile: {
      const CsvTable t = read_csv(spec.path);
      const int id_col = t.col("id");
      const int u_col = t.col("utility");
      std::map<std::string, double> by_id;
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        by_id[t.cell(r, id_col)] = t.num(r, u_col);
      }
      for (std::size_t n = 0; n < consumers.size(); ++n) {
        const auto it = by_id.find(consumers[n].id);
        if (it == by_id.end()) {
          throw ParseError(spec.path + ": no utility for consumer '" +
                           consumers[n].id + "'");
        }
        out[n] = it->second;
      }
      break;
    }
  }
  return out;
}

Network load_rts_gmlc(const std::string& dir,
                      const EmissionIntensityTable& intensities,
                      double flex_floor, const UtilitySpec& utilities) {
  if (!(flex_floor > 0.0) || flex_floor > 1.0) {
    throw InputError("flex_floor must lie in (0, 1]");
  }
  const CsvTable buses = read_csv(dir + "/bus.csv");
  const CsvTable branches = read_csv(dir + "/branch.csv");
  const CsvTable gens = read_csv(dir + "/gen.csv");
  constexpr double kBaseMva = 100.0;

  Network net;
  const int b_id = buses.col("Bus ID");
  const int b_load = buses.col("MW Load");
  std::string ref_id;
  for (std::size_t r = 0; r < buses.rows.size(); ++r) {
    Bus b;
    b.id = buses.cell(r, b_id);
    net.buses.push_back(b);
    if (ref_id.empty() || bus_id_less(b.id, ref_id)) ref_id = b.id;
  }
  for (Bus& b : net.buses) b.is_reference = (b.id == ref_id);

  for (std::size_t r = 0; r < buses.rows.size(); ++r) {
    const double load = buses.num(r, b_load);
    if (load < 0.0) {
      throw ParseError(buses.path + ":" + std::to_string(r + 2) +
                       ": negative MW Load");
    }
    if (load == 0.0) continue;
    Consumer d;
    d.id = "load_" + buses.cell(r, b_id);
    d.bus = buses.cell(r, b_id);
    d.p_max = load;
    d.p_min = flex_floor * load;
    d.carbon_cost = 0.0;
    net.consumers.push_back(d);
  }
  const std::vector<double> u = assign_utilities(net.consumers, utilities);
  for (std::size_t n = 0; n < net.consumers.size(); ++n) {
    net.consumers[n].utility = u[n];
  }

  const int br_uid = branches.col("UID");
  const int br_from = branches.col("From Bus");
  const int br_to = branches.col("To Bus");
  const int br_x = branches.col("X");
  const int br_rating = branches.col("Cont Rating");
  for (std::size_t r = 0; r < branches.rows.size(); ++r) {
    Line l;
    l.id = branches.cell(r, br_uid);
    l.from_bus = branches.cell(r, br_from);
    l.to_bus = branches.cell(r, br_to);
    const double x = branches.num(r, br_x);
    if (x <= 0.0) {
      throw ParseError(branches.path + ":" + std::to_string(r + 2) +
                       ": column 'X': reactance must be positive");
    }
    l.susceptance = kBaseMva / x;
    l.flow_limit = branches.num(r, br_rating);
    net.lines.push_back(l);
  }

  const int g_uid = gens.col("GEN UID");
  const int g_bus = gens.col("Bus ID");
  const int g_fuel = gens.col("Fuel");
  const int g_inj = gens.col("MW Inj");
  const int g_pmax = gens.col("PMax MW");
  const int g_pmin = gens.col("PMin MW");
  const int g_price = gens.col("Fuel Price $/MMBTU");
  const int g_hr = gens.col("HR_avg_0");
  for (std::size_t r = 0; r < gens.rows.size(); ++r) {
    Generator g;
    g.id = gens.cell(r, g_uid);
    g.bus = gens.cell(r, g_bus);
    const std::string fuel = lower(gens.cell(r, g_fuel));
    g.emission_intensity = intensities.lookup(gens.cell(r, g_fuel));
    const bool variable = fuel == "wind" || fuel == "solar" ||
                          fuel == "hydro" || fuel == "storage";
    if (variable) {
      // The injection snapshot is the available output for the interval.
      g.p_max = gens.num(r, g_inj);
      g.p_min = 0.0;
      g.cost = 0.0;
    } else {
      g.p_max = gens.num(r, g_pmax);
      g.p_min = gens.num(r, g_pmin);
      // $/MWh from fuel price [$/MMBTU] and average heat rate [BTU/kWh].
      g.cost = gens.num(r, g_price) * gens.num(r, g_hr) / 1000.0;
    }
    net.generators.push_back(g);
  }

  const auto violations = validate_network(net);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << dir << ": loaded network is invalid:";
    for (const auto& v : violations) {
      msg << " [" << v.code << "] " << v.detail;
    }
    throw ParseError(msg.str());
  }
  return net;
}

std::vector<double> generate_carbon_costs(std::size_t num_consumers,
                                          double lo, double hi,
                                          double fraction_percent,
                                          std::uint64_t seed) {
  if (lo < 0.0 || hi < lo) {
    throw InputError("carbon cost range must satisfy 0 <= lo <= hi");
  }
  if (fraction_percent < 0.0 || fraction_percent > 100.0) {
    throw InputError("carbon-sensitive fraction must lie in [0, 100]");
  }
  std::vector<double> out(num_consumers, 0.0);
  const auto k = static_cast<std::size_t>(
      std::llround(fraction_percent * static_cast<double>(num_consumers) /
                   100.0));
  Rng rng(seed);
  std::vector<std::size_t> order(num_consumers);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<bool> selected(num_consumers, false);
  for (std::size_t i = 0; i < k && i < num_consumers; ++i) {
    selected[order[i]] = true;
  }
  // Values are drawn in consumer-index order so that, for a fixed seed,
  // the draw attached to a consumer does not depend on the range.
  for (std::size_t n = 0; n < num_consumers; ++n) {
    if (selected[n]) out[n] = rng.uniform(lo, hi);
  }
  return out;
}

namespace {

void check_known_keys(const json& obj, const std::vector<std::string>& known,
                      const std::string& where, bool strict) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) != known.end()) continue;
    const std::string msg =
        "scenario file: unknown field '" + key + "' in " + where;
    if (strict) throw ParseError(msg + " (strict mode)");
    std::cerr << "warning: " << msg << "\n";
  }
}

json units_block() {
  return json{{"power", "MW"},
              {"susceptance", "MW/rad"},
              {"cost", "USD/MWh"},
              {"utility", "USD/MWh"},
              {"carbon_cost", "USD/ton"},
              {"emission_intensity", "tons/MWh"},
              {"flow_limit", "MW"}};
}

double require_num(const json& obj, const std::string& key,
                   const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_number()) {
    throw ParseError("scenario file: " + where + ": missing numeric field '" +
                     key + "'");
  }
  return obj[key].get<double>();
}

std::string require_str(const json& obj, const std::string& key,
                        const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_string()) {
    throw ParseError("scenario file: " + where + ": missing string field '" +
                     key + "'");
  }
  return obj[key].get<std::string>();
}

}  // namespace

Scenario load_scenario_file(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!doc.contains("version")) {
    throw ParseError(path + ": missing mandatory 'version' field");
  }
  if (doc["version"].get<int>() != kScenarioSchemaVersion) {
    throw ParseError(path + ": unsupported schema version " +
                     doc["version"].dump() + ", expected " +
                     std::to_string(kScenarioSchemaVersion));
  }
  check_known_keys(doc, {"version", "units", "network", "spec"}, "document",
                   strict);

  Scenario sc;
  const json& net = doc.at("network");
  check_known_keys(net, {"buses", "lines", "generators", "consumers"},
                   "network", strict);
  for (const json& jb : net.at("buses")) {
    check_known_keys(jb, {"id", "reference"}, "bus", strict);
    Bus b;
    b.id = require_str(jb, "id", "bus");
    b.is_reference = jb.value("reference", false);
    sc.network.buses.push_back(b);
  }
  for (const json& jl : net.at("lines")) {
    check_known_keys(jl, {"id", "from", "to", "susceptance", "flow_limit"},
                     "line", strict);
    Line l;
    l.id = require_str(jl, "id", "line");
    l.from_bus = require_str(jl, "from", "line " + l.id);
    l.to_bus = require_str(jl, "to", "line " + l.id);
    l.susceptance = require_num(jl, "susceptance", "line " + l.id);
    l.flow_limit = require_num(jl, "flow_limit", "line " + l.id);
    if (l.flow_limit < 0.0) {
      throw ParseError("scenario file: line " + l.id +
                       ": bound: flow_limit must be non-negative");
    }
    sc.network.lines.push_back(l);
  }
  for (const json& jg : net.at("generators")) {
    check_known_keys(
        jg, {"id", "bus", "cost", "p_min", "p_max", "emission_intensity"},
        "generator", strict);
    Generator g;
    g.id = require_str(jg, "id", "generator");
    g.bus = require_str(jg, "bus", "generator " + g.id);
    g.cost = require_num(jg, "cost", "generator " + g.id);
    g.p_min = require_num(jg, "p_min", "generator " + g.id);
    g.p_max = require_num(jg, "p_max", "generator " + g.id);
    g.emission_intensity =
        require_num(jg, "emission_intensity", "generator " + g.id);
    if (g.p_min < 0.0 || g.p_min > g.p_max) {
      throw ParseError("scenario file: generator " + g.id +
                       ": bound: p_min/p_max ordering");
    }
    sc.network.generators.push_back(g);
  }
  for (const json& jd : net.at("consumers")) {
    check_known_keys(
        jd, {"id", "bus", "utility", "p_min", "p_max", "carbon_cost"},
        "consumer", strict);
    Consumer d;
    d.id = require_str(jd, "id", "consumer");
    d.bus = require_str(jd, "bus", "consumer " + d.id);
    d.utility = require_num(jd, "utility", "consumer " + d.id);
    d.p_min = require_num(jd, "p_min", "consumer " + d.id);
    d.p_max = require_num(jd, "p_max", "consumer " + d.id);
    d.carbon_cost = require_num(jd, "carbon_cost", "consumer " + d.id);
    if (d.p_min < 0.0 || d.p_min > d.p_max) {
      throw ParseError("scenario file: consumer " + d.id +
                       ": bound: p_min/p_max ordering");
    }
    if (d.carbon_cost < 0.0) {
      throw ParseError("scenario file: consumer " + d.id +
                       ": bound: carbon_cost must be non-negative");
    }
    sc.network.consumers.push_back(d);
  }

  const json& spec = doc.at("spec");
  check_known_keys(spec,
                   {"network_source", "carbon_cost_range",
                    "carbon_sensitive_fraction", "demand_flex_floor", "seed",
                    "trials"},
                   "spec", strict);
  sc.spec.network_source = spec.value("network_source", std::string{path});
  if (spec.contains("carbon_cost_range")) {
    const json& r = spec["carbon_cost_range"];
    if (!r.is_array() || r.size() != 2) {
      throw ParseError("scenario file: spec.carbon_cost_range must be "
                       "[lo, hi]");
    }
    sc.spec.carbon_cost_lo = r[0].get<double>();
    sc.spec.carbon_cost_hi = r[1].get<double>();
    if (sc.spec.carbon_cost_lo < 0.0 ||
        sc.spec.carbon_cost_hi < sc.spec.carbon_cost_lo) {
      throw ParseError(
          "scenario file: bound: carbon_cost_range must satisfy 0 <= lo <= "
          "hi");
    }
  }
  sc.spec.carbon_sensitive_fraction =
      spec.value("carbon_sensitive_fraction", 100.0);
  if (sc.spec.carbon_sensitive_fraction < 0.0 ||
      sc.spec.carbon_sensitive_fraction > 100.0) {
    throw ParseError(
        "scenario file: bound: carbon_sensitive_fraction in [0, 100]");
  }
  sc.spec.demand_flex_floor = spec.value("demand_flex_floor", 0.8);
  if (!(sc.spec.demand_flex_floor > 0.0) || sc.spec.demand_flex_floor > 1.0) {
    throw ParseError("scenario file: bound: demand_flex_floor in (0, 1]");
  }
  sc.spec.seed = spec.value("seed", std::uint64_t{0});
  sc.spec.trials = spec.value("trials", 1);
  if (sc.spec.trials < 1) {
    throw ParseError("scenario file: bound: trials must be >= 1");
  }

  const auto violations = validate_network(sc.network);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << path << ": invalid network:";
    for (const auto& v : violations) {
      msg << " [" << v.code << "] " << v.detail;
    }
    throw ParseError(msg.str());
  }
  return sc;
}

void save_scenario_file(const Scenario& scenario, const std::string& path) {
  json doc;
  doc["version"] = kScenarioSchemaVersion;
  doc["units"] = units_block();
  json buses = json::array();
  for (const Bus& b : scenario.network.buses) {
    buses.push_back({{"id", b.id}, {"reference", b.is_reference}});
  }
  json lines = json::array();
  for (const Line& l : scenario.network.lines) {
    lines.push_back({{"id", l.id},
                     {"from", l.from_bus},
                     {"to", l.to_bus},
                     {"susceptance", l.susceptance},
                     {"flow_limit", l.flow_limit}});
  }
  json gens = json::array();
  for (const Generator& g : scenario.network.generators) {
    gens.push_back({{"id", g.id},
                    {"bus", g.bus},
                    {"cost", g.cost},
                    {"p_min", g.p_min},
                    {"p_max", g.p_max},
                    {"emission_intensity", g.emission_intensity}});
  }
  json cons = json::array();
  for (const Consumer& d : scenario.network.consumers) {
    cons.push_back({{"id", d.id},
                    {"bus", d.bus},
                    {"utility", d.utility},
                    {"p_min", d.p_min},
                    {"p_max", d.p_max},
                    {"carbon_cost", d.carbon_cost}});
  }
  doc["network"] = {{"buses", buses},
                    {"lines", lines},
                    {"generators", gens},
                    {"consumers", cons}};
  doc["spec"] = {
      {"network_source", scenario.spec.network_source},
      {"carbon_cost_range",
       {scenario.spec.carbon_cost_lo, scenario.spec.carbon_cost_hi}},
      {"carbon_sensitive_fraction", scenario.spec.carbon_sensitive_fraction},
      {"demand_flex_floor", scenario.spec.demand_flex_floor},
      {"seed", scenario.spec.seed},
      {"trials", scenario.spec.trials}};

  std::ofstream out(path);
  if (!out) throw InputError(path + ": cannot open for writing");
  out << doc.dump(2) << "\n";
}

Scenario resolve_network_source(const std::string& source,
                                const UtilitySpec& utilities,
                                double flex_floor, bool strict) {
  Scenario sc;
  if (source == "builtin:3bus") {
    sc.network = builtin_three_bus();
    sc.spec.network_source = source;
    sc.spec.demand_flex_floor = flex_floor;
    return sc;
  }
  if (source.rfind("rts-gmlc:", 0) == 0) {
    const std::string dir = source.substr(9);
    sc.network =
        load_rts_gmlc(dir, default_intensity_table(), flex_floor, utilities);
    sc.spec.network_source = source;
    sc.spec.demand_flex_floor = flex_floor;
    return sc;
  }
  const std::string path =
      source.rfind("file:", 0) == 0 ? source.substr(5) : source;
  return load_scenario_file(path, strict);
}

}  // namespace carbonclear

#include "carbonclear/model.hpp"

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "carbonclear/errors.hpp"

namespace carbonclear {

int Network::bus_index(const std::string& id) const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

int Network::reference_index() const {
  int ref = -1;
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (!buses[i].is_reference) continue;
    if (ref >= 0) return -1;
    ref = static_cast<int>(i);
  }
  return ref;
}

namespace {

void check_bounds(std::vector<Violation>& out, const std::string& kind,
                  const std::string& id, double lo, double hi) {
  if (lo < 0.0 || lo > hi) {
    out.push_back({"bound-order", kind + " " + id + " has p_min " +
                                      std::to_string(lo) + ", p_max " +
                                      std::to_string(hi)});
  }
}

}  // namespace

std::vector<Violation> validate_network(const Network& net) {
  std::vector<Violation> out;

  std::set<std::string> bus_ids;
  int refs = 0;
  for (const Bus& b : net.buses) {
    if (!bus_ids.insert(b.id).second) {
      out.push_back({"duplicate-id", "bus id " + b.id + " appears twice"});
    }
    if (b.is_reference) ++refs;
  }
  if (refs == 0) {
    out.push_back({"no-reference", "no bus is marked as reference"});
  } else if (refs > 1) {
    out.push_back({"multiple-reference",
                   std::to_string(refs) + " buses are marked as reference"});
  }

  std::set<std::string> seen;
  for (const Line& l : net.lines) {
    if (l.from_bus == l.to_bus) {
      out.push_back({"self-loop", "line " + l.id + " connects " + l.from_bus +
                                      " to itself"});
    }
    for (const std::string& end : {l.from_bus, l.to_bus}) {
      if (!bus_ids.count(end)) {
        out.push_back(
            {"unknown-bus", "line " + l.id + " references bus " + end});
      }
    }
    if (l.flow_limit < 0.0) {
      out.push_back({"negative-limit", "line " + l.id + " has flow_limit " +
                                           std::to_string(l.flow_limit)});
    }
  }
  for (const Generator& g : net.generators) {
    if (!seen.insert("g:" + g.id).second) {
      out.push_back({"duplicate-id", "generator id " + g.id});
    }
    if (!bus_ids.count(g.bus)) {
      out.push_back(
          {"unknown-bus", "generator " + g.id + " references bus " + g.bus});
    }
    check_bounds(out, "generator", g.id, g.p_min, g.p_max);
    if (g.cost < 0.0) {
      out.push_back({"negative-cost", "generator " + g.id});
    }
    if (g.emission_intensity < 0.0) {
      out.push_back({"negative-emission", "generator " + g.id});
    }
  }
  for (const Consumer& d : net.consumers) {
    if (!seen.insert("d:" + d.id).second) {
      out.push_back({"duplicate-id", "consumer id " + d.id});
    }
    if (!bus_ids.count(d.bus)) {
      out.push_back(
          {"unknown-bus", "consumer " + d.id + " references bus " + d.bus});
    }
    check_bounds(out, "consumer", d.id, d.p_min, d.p_max);
    if (d.carbon_cost < 0.0) {
      out.push_back({"negative-carbon-cost", "consumer " + d.id});
    }
  }

  // Connectivity over the (buses, lines) graph.
  if (!net.buses.empty()) {
    std::map<std::string, std::size_t> comp_of;
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
      comp_of[net.buses[i].id] = i;
    }
    // Union-find, small networks only.
    std::vector<std::size_t> parent(net.buses.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
    auto find = [&](std::size_t a) {
      while (parent[a] != a) a = parent[a] = parent[parent[a]];
      return a;
    };
    for (const Line& l : net.lines) {
      auto fa = comp_of.find(l.from_bus);
      auto fb = comp_of.find(l.to_bus);
      if (fa == comp_of.end() || fb == comp_of.end()) continue;
      parent[find(fa->second)] = find(fb->second);
    }
    const std::size_t root = find(0);
    for (std::size_t i = 1; i < net.buses.size(); ++i) {
      if (find(i) != root) {
        out.push_back({"disconnected",
                       "bus " + net.buses[i].id + " is not connected to " +
                           net.buses[0].id});
        break;
      }
    }
  }
  return out;
}

std::vector<Violation> check_solution(const Network& net,
                                      const DispatchSolution& sol,
                                      bool expect_allocation) {
  std::vector<Violation> out;
  const std::size_t ng = net.generators.size();
  const std::size_t nd = net.consumers.size();
  const std::size_t nb = net.buses.size();

  if (sol.p_g.size() != ng || sol.p_d.size() != nd ||
      sol.theta.size() != nb || sol.line_flows.size() != net.lines.size()) {
    out.push_back({"shape", "solution vectors do not match the network"});
    return out;
  }

  const int ref = net.reference_index();
  if (ref >= 0 && std::abs(sol.theta[ref]) > kFeasTol) {
    out.push_back({"reference-angle", "theta at the reference bus is " +
                                          std::to_string(sol.theta[ref])});
  }

  for (std::size_t m = 0; m < ng; ++m) {
    const Generator& g = net.generators[m];
    if (sol.p_g[m] < g.p_min - kFeasTol || sol.p_g[m] > g.p_max + kFeasTol) {
      out.push_back({"generator-bounds", g.id});
    }
  }
  for (std::size_t n = 0; n < nd; ++n) {
    const Consumer& d = net.consumers[n];
    if (sol.p_d[n] < d.p_min - kFeasTol || sol.p_d[n] > d.p_max + kFeasTol) {
      out.push_back({"consumer-bounds", d.id});
    }
  }

  // Line flows against angles and limits, and nodal balance.
  std::vector<double> injection(nb, 0.0);
  for (std::size_t l = 0; l < net.lines.size(); ++l) {
    const Line& line = net.lines[l];
    const int a = net.bus_index(line.from_bus);
    const int b = net.bus_index(line.to_bus);
    const double f = line.susceptance * (sol.theta[a] - sol.theta[b]);
    if (std::abs(f - sol.line_flows[l]) > kFeasTol * 10) {
      out.push_back({"flow-mismatch", line.id});
    }
    if (std::abs(f) > line.flow_limit + kFeasTol * 10) {
      out.push_back({"line-limit", line.id});
    }
    injection[a] -= f;
    injection[b] += f;
  }
  for (std::size_t m = 0; m < ng; ++m) {
    injection[net.bus_index(net.generators[m].bus)] += sol.p_g[m];
  }
  for (std::size_t n = 0; n < nd; ++n) {
    injection[net.bus_index(net.consumers[n].bus)] -= sol.p_d[n];
  }
  for (std::size_t i = 0; i < nb; ++i) {
    if (std::abs(injection[i]) > kFeasTol * 10) {
      out.push_back({"balance", "bus " + net.buses[i].id + " imbalance " +
                                    std::to_string(injection[i])});
    }
  }

  if (expect_allocation) {
    if (sol.allocation.size() != ng || sol.e_d.size() != nd) {
      out.push_back({"shape", "allocation matrix missing or mis-sized"});
      return out;
    }
    std::vector<double> col_sum(nd, 0.0);
    double allocated_emissions = 0.0;
    double generated_emissions = 0.0;
    std::vector<double> e_d_check(nd, 0.0);
    for (std::size_t m = 0; m < ng; ++m) {
      if (sol.allocation[m].size() != nd) {
        out.push_back({"shape", "allocation row mis-sized"});
        return out;
      }
      double row_sum = 0.0;
      for (std::size_t n = 0; n < nd; ++n) {
        const double pi = sol.allocation[m][n];
        if (pi < -kFeasTol) {
          out.push_back({"allocation-negative",
                         net.generators[m].id + " -> " + net.consumers[n].id});
        }
        row_sum += pi;
        col_sum[n] += pi;
        e_d_check[n] += net.generators[m].emission_intensity * pi;
      }
      if (std::abs(row_sum - sol.p_g[m]) > kFeasTol) {
        out.push_back({"allocation-row-sum", net.generators[m].id});
      }
      generated_emissions += net.generators[m].emission_intensity * sol.p_g[m];
    }
    for (std::size_t n = 0; n < nd; ++n) {
      if (std::abs(col_sum[n] - sol.p_d[n]) > kFeasTol) {
        out.push_back({"allocation-col-sum", net.consumers[n].id});
      }
      if (std::abs(e_d_check[n] - sol.e_d[n]) > kFeasTol) {
        out.push_back({"consumer-emissions", net.consumers[n].id});
      }
      allocated_emissions += sol.e_d[n];
    }
    if (std::abs(allocated_emissions - generated_emissions) >
        kFeasTol * std::max(1.0, generated_emissions)) {
      out.push_back({"emission-conservation",
                     "allocated " + std::to_string(allocated_emissions) +
                         " vs generated " +
                         std::to_string(generated_emissions)});
    }
  }
  return out;
}

Network builtin_three_bus(
    const std::optional<std::array<LineParams, 3>>& line_params) {
  std::array<LineParams, 3> lp =
      line_params.value_or(std::array<LineParams, 3>{});
  for (const LineParams& p : lp) {
    if (p.flow_limit < 0.0 || p.susceptance <= 0.0) {
      throw InputError("three-bus line parameters must have positive "
                       "susceptance and non-negative flow limit");
    }
  }

  Network net;
  net.buses = {{"1", true}, {"2", false}, {"3", false}};
  net.lines = {{"1-2", "1", "2", lp[0].susceptance, lp[0].flow_limit},
               {"1-3", "1", "3", lp[1].susceptance, lp[1].flow_limit},
               {"2-3", "2", "3", lp[2].susceptance, lp[2].flow_limit}};
  net.generators = {{"g1", "1", 8.0, 0.0, 20.0, 0.6},
                    {"g2", "2", 10.0, 0.0, 10.0, 1.0},
                    {"g3", "3", 6.0, 0.0, 25.0, 0.2}};
  net.consumers = {{"d1", "1", 18.0, 4.0, 6.0, 0.0},
                   {"d2", "2", 20.0, 16.0, 24.0, 0.0},
                   {"d3", "3", 21.0, 12.0, 18.0, 0.0}};
  return net;
}

}  // namespace carbonclear

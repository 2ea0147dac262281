#include "carbonclear/clearing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "carbonclear/errors.hpp"
#include "carbonclear/lp.hpp"
#include "clearing_detail.hpp"

namespace carbonclear {

std::string to_string(ClearingModelKind kind) {
  switch (kind) {
    case ClearingModelKind::CarbonCost:
      return "carbon-cost";
    case ClearingModelKind::FixedDemand:
      return "fixed";
    case ClearingModelKind::FlexibleDemand:
      return "flexible";
  }
  return "?";
}

namespace {

using lp::LinearProgram;
using lp::Relation;

void require_valid(const Network& net) {
  const auto violations = validate_network(net);
  if (violations.empty()) return;
  std::ostringstream msg;
  msg << "invalid network:";
  for (const auto& v : violations) msg << " [" << v.code << "] " << v.detail;
  throw InputError(msg.str());
}

std::vector<std::string> families_of(const std::vector<std::string>& rows) {
  std::set<std::string> fams;
  for (const std::string& r : rows) {
    fams.insert(r.substr(0, r.find('[')));
  }
  return {fams.begin(), fams.end()};
}

// Greedy fill over generators sorted by emission intensity and consumers
// sorted by descending weight. For weights w and intensities e the cost
// w[n]*e[m] satisfies the quadrangle inequality under these orders, so the
// northwest-corner fill is an exact minimizer.
AllocationResult allocate_weighted(const std::vector<double>& p_g,
                                   const std::vector<double>& p_d,
                                   const std::vector<double>& e_g,
                                   const std::vector<double>& weights,
                                   const std::vector<double>& c_co2) {
  const std::size_t ng = p_g.size();
  const std::size_t nd = p_d.size();
  if (e_g.size() != ng || weights.size() != nd || c_co2.size() != nd) {
    throw InputError("allocate_transportation: mismatched vector lengths");
  }
  double supply = 0.0, demand = 0.0;
  for (double v : p_g) {
    if (!std::isfinite(v) || v < -kFeasTol) {
      throw InputError("allocate_transportation: negative dispatch");
    }
    supply += std::max(v, 0.0);
  }
  for (double v : p_d) {
    if (!std::isfinite(v) || v < -kFeasTol) {
      throw InputError("allocate_transportation: negative consumption");
    }
    demand += std::max(v, 0.0);
  }
  for (double v : e_g) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InputError("allocate_transportation: negative intensity");
    }
  }
  if (std::abs(supply - demand) > kFeasTol * std::max(1.0, supply)) {
    throw InputError("allocate_transportation: supply " +
                     std::to_string(supply) + " MW does not match demand " +
                     std::to_string(demand) + " MW");
  }

  std::vector<int> order_g(ng), order_d(nd);
  std::iota(order_g.begin(), order_g.end(), 0);
  std::iota(order_d.begin(), order_d.end(), 0);
  std::stable_sort(order_g.begin(), order_g.end(),
                   [&](int a, int b) { return e_g[a] < e_g[b]; });
  std::stable_sort(order_d.begin(), order_d.end(),
                   [&](int a, int b) { return weights[a] > weights[b]; });

  AllocationResult res;
  res.allocation.assign(ng, std::vector<double>(nd, 0.0));
  std::vector<double> rem_g(ng), rem_d(nd);
  for (std::size_t m = 0; m < ng; ++m) rem_g[m] = std::max(p_g[m], 0.0);
  for (std::size_t n = 0; n < nd; ++n) rem_d[n] = std::max(p_d[n], 0.0);

  const double eps = 1e-9 * std::max(1.0, supply);
  std::size_t gi = 0, di = 0;
  while (gi < ng && di < nd) {
    const int m = order_g[gi];
    const int n = order_d[di];
    const double amount = std::min(rem_g[m], rem_d[n]);
    if (amount > 0.0) res.allocation[m][n] += amount;
    rem_g[m] -= amount;
    rem_d[n] -= amount;
    const bool g_done = rem_g[m] <= eps;
    const bool d_done = rem_d[n] <= eps;
    if (g_done) ++gi;
    if (d_done) ++di;
    if (!g_done && !d_done) ++di;  // can not happen; guards against stalls
  }

  res.e_d.assign(nd, 0.0);
  for (std::size_t m = 0; m < ng; ++m) {
    for (std::size_t n = 0; n < nd; ++n) {
      res.e_d[n] += e_g[m] * res.allocation[m][n];
    }
  }
  res.carbon_term = 0.0;
  for (std::size_t n = 0; n < nd; ++n) {
    res.carbon_term += c_co2[n] * res.e_d[n];
  }
  return res;
}

struct OpfIndex {
  int pg0 = 0, pd0 = 0, theta0 = 0, pi0 = -1, ed0 = -1;
  int pi(int m, int n, int nd) const { return pi0 + m * nd + n; }
};

DispatchSolution solve_opf(const Network& net, ClearingModelKind kind,
                           const std::vector<double>* demand_coeffs = nullptr,
                           const std::vector<double>* gen_adders = nullptr) {
  require_valid(net);
  const int ng = static_cast<int>(net.generators.size());
  const int nd = static_cast<int>(net.consumers.size());
  const int nb = static_cast<int>(net.buses.size());
  const bool allocate = kind == ClearingModelKind::CarbonCost;

  LinearProgram prog;
  prog.sense = kind == ClearingModelKind::FixedDemand ? lp::Sense::Minimize
                                                      : lp::Sense::Maximize;
  OpfIndex ix;
  ix.pg0 = 0;
  for (const Generator& g : net.generators) {
    prog.add_variable(g.p_min, g.p_max, 0.0);
  }
  ix.pd0 = static_cast<int>(prog.num_vars());
  for (const Consumer& d : net.consumers) {
    if (kind == ClearingModelKind::FixedDemand) {
      prog.add_variable(d.p_max, d.p_max, 0.0);
    } else {
      prog.add_variable(d.p_min, d.p_max, 0.0);
    }
  }
  ix.theta0 = static_cast<int>(prog.num_vars());
  for (int i = 0; i < nb; ++i) {
    prog.add_variable(-lp::kInf, lp::kInf, 0.0);
  }
  if (allocate) {
    ix.pi0 = static_cast<int>(prog.num_vars());
    for (int m = 0; m < ng; ++m) {
      for (int n = 0; n < nd; ++n) {
        prog.add_variable(0.0, lp::kInf, 0.0);
      }
    }
    ix.ed0 = static_cast<int>(prog.num_vars());
    for (int n = 0; n < nd; ++n) {
      prog.add_variable(-lp::kInf, lp::kInf, 0.0);
    }
  }

  // Objective.
  for (int m = 0; m < ng; ++m) {
    const double c =
        net.generators[m].cost + (gen_adders ? (*gen_adders)[m] : 0.0);
    prog.objective[ix.pg0 + m] =
        kind == ClearingModelKind::FixedDemand ? c : -c;
  }
  if (kind != ClearingModelKind::FixedDemand) {
    for (int n = 0; n < nd; ++n) {
      prog.objective[ix.pd0 + n] =
          demand_coeffs ? (*demand_coeffs)[n] : net.consumers[n].utility;
    }
  }
  if (allocate) {
    for (int n = 0; n < nd; ++n) {
      prog.objective[ix.ed0 + n] = -net.consumers[n].carbon_cost;
    }
  }

  // Nodal balance: consumption + net outflow = generation.
  std::vector<lp::Constraint> balance(nb);
  for (int i = 0; i < nb; ++i) {
    balance[i].relation = Relation::Equal;
    balance[i].rhs = 0.0;
    balance[i].name = "balance[" + net.buses[i].id + "]";
  }
  for (int m = 0; m < ng; ++m) {
    const int b = net.bus_index(net.generators[m].bus);
    balance[b].coeffs.emplace_back(ix.pg0 + m, -1.0);
  }
  for (int n = 0; n < nd; ++n) {
    const int b = net.bus_index(net.consumers[n].bus);
    balance[b].coeffs.emplace_back(ix.pd0 + n, 1.0);
  }
  for (const Line& line : net.lines) {
    const int a = net.bus_index(line.from_bus);
    const int b = net.bus_index(line.to_bus);
    balance[a].coeffs.emplace_back(ix.theta0 + a, line.susceptance);
    balance[a].coeffs.emplace_back(ix.theta0 + b, -line.susceptance);
    balance[b].coeffs.emplace_back(ix.theta0 + b, line.susceptance);
    balance[b].coeffs.emplace_back(ix.theta0 + a, -line.susceptance);
  }
  for (auto& c : balance) prog.add_constraint(std::move(c));

  for (const Line& line : net.lines) {
    const int a = net.bus_index(line.from_bus);
    const int b = net.bus_index(line.to_bus);
    lp::Constraint up;
    up.coeffs = {{ix.theta0 + a, line.susceptance},
                 {ix.theta0 + b, -line.susceptance}};
    up.relation = Relation::LessEqual;
    up.rhs = line.flow_limit;
    up.name = "line[" + line.id + "]";
    prog.add_constraint(up);
    lp::Constraint dn = up;
    for (auto& [j, v] : dn.coeffs) v = -v;
    prog.add_constraint(std::move(dn));
  }

  {
    lp::Constraint ref;
    ref.coeffs = {{ix.theta0 + net.reference_index(), 1.0}};
    ref.relation = Relation::Equal;
    ref.rhs = 0.0;
    ref.name = "reference[]";
    prog.add_constraint(std::move(ref));
  }

  if (allocate) {
    for (int m = 0; m < ng; ++m) {
      lp::Constraint row;
      row.relation = Relation::Equal;
      row.rhs = 0.0;
      row.name = "allocation-row[" + net.generators[m].id + "]";
      row.coeffs.emplace_back(ix.pg0 + m, -1.0);
      for (int n = 0; n < nd; ++n) {
        row.coeffs.emplace_back(ix.pi(m, n, nd), 1.0);
      }
      prog.add_constraint(std::move(row));
    }
    for (int n = 0; n < nd; ++n) {
      lp::Constraint col;
      col.relation = Relation::Equal;
      col.rhs = 0.0;
      col.name = "allocation-col[" + net.consumers[n].id + "]";
      col.coeffs.emplace_back(ix.pd0 + n, -1.0);
      for (int m = 0; m < ng; ++m) {
        col.coeffs.emplace_back(ix.pi(m, n, nd), 1.0);
      }
      prog.add_constraint(std::move(col));
    }
    for (int n = 0; n < nd; ++n) {
      lp::Constraint emis;
      emis.relation = Relation::Equal;
      emis.rhs = 0.0;
      emis.name = "emission[" + net.consumers[n].id + "]";
      emis.coeffs.emplace_back(ix.ed0 + n, -1.0);
      for (int m = 0; m < ng; ++m) {
        const double e = net.generators[m].emission_intensity;
        if (e != 0.0) emis.coeffs.emplace_back(ix.pi(m, n, nd), e);
      }
      prog.add_constraint(std::move(emis));
    }
  }

  lp::SolverOptions opts;
  opts.max_iterations = 500000;
  const lp::Solution s = lp::solve_lp(prog, opts);
  if (s.status == lp::Status::Infeasible) {
    const auto fams = families_of(s.infeasible_rows);
    std::ostringstream msg;
    msg << to_string(kind) << " clearing is infeasible; implicated: ";
    for (std::size_t i = 0; i < fams.size(); ++i) {
      msg << (i ? ", " : "") << fams[i];
    }
    throw InfeasibleError(msg.str(), fams);
  }
  if (s.status == lp::Status::Unbounded) {
    throw InternalError("clearing LP reported unbounded despite finite "
                        "dispatch bounds");
  }

  DispatchSolution sol;
  sol.p_g.assign(ng, 0.0);
  sol.p_d.assign(nd, 0.0);
  sol.theta.assign(nb, 0.0);
  for (int m = 0; m < ng; ++m) sol.p_g[m] = s.values[ix.pg0 + m];
  for (int n = 0; n < nd; ++n) sol.p_d[n] = s.values[ix.pd0 + n];
  for (int i = 0; i < nb; ++i) sol.theta[i] = s.values[ix.theta0 + i];
  sol.line_flows.reserve(net.lines.size());
  for (const Line& line : net.lines) {
    const int a = net.bus_index(line.from_bus);
    const int b = net.bus_index(line.to_bus);
    sol.line_flows.push_back(line.susceptance *
                             (sol.theta[a] - sol.theta[b]));
  }

  if (allocate) {
    bool all_zero = true;
    for (const Consumer& d : net.consumers) {
      if (d.carbon_cost != 0.0) all_zero = false;
    }
    if (all_zero) {
      // The allocation does not affect the optimum; report a canonical
      // matrix (clean generation toward high consumer index) instead of
      // whatever vertex the solve landed on, and flag the degeneracy.
      std::vector<double> e_g(ng), weights(nd), zeros(nd, 0.0);
      for (int m = 0; m < ng; ++m) {
        e_g[m] = net.generators[m].emission_intensity;
      }
      for (int n = 0; n < nd; ++n) weights[n] = static_cast<double>(n + 1);
      AllocationResult canon =
          allocate_weighted(sol.p_g, sol.p_d, e_g, weights, zeros);
      sol.allocation = std::move(canon.allocation);
      sol.e_d = std::move(canon.e_d);
      sol.allocation_degenerate = true;
    } else {
      sol.allocation.assign(ng, std::vector<double>(nd, 0.0));
      sol.e_d.assign(nd, 0.0);
      for (int m = 0; m < ng; ++m) {
        for (int n = 0; n < nd; ++n) {
          sol.allocation[m][n] = std::max(0.0, s.values[ix.pi(m, n, nd)]);
        }
      }
      for (int n = 0; n < nd; ++n) sol.e_d[n] = s.values[ix.ed0 + n];
    }
  }

  sol.objective_terms = ObjectiveTerms{};
  for (int n = 0; n < nd; ++n) {
    sol.objective_terms.utility += net.consumers[n].utility * sol.p_d[n];
  }
  for (int m = 0; m < ng; ++m) {
    sol.objective_terms.generation_cost +=
        net.generators[m].cost * sol.p_g[m];
  }
  if (allocate) {
    for (int n = 0; n < nd; ++n) {
      sol.objective_terms.carbon +=
          net.consumers[n].carbon_cost * sol.e_d[n];
    }
  }
  sol.objective = sol.objective_terms.welfare();

  const auto bad = check_solution(net, sol, allocate);
  if (!bad.empty()) {
    throw InternalError("clearing produced a solution violating " +
                        bad.front().code);
  }
  return sol;
}

}  // namespace

DispatchSolution clear_carbon_cost(const Network& net) {
  return solve_opf(net, ClearingModelKind::CarbonCost);
}

DispatchSolution clear_fixed_demand(const Network& net) {
  return solve_opf(net, ClearingModelKind::FixedDemand);
}

DispatchSolution clear_flexible_demand(const Network& net) {
  return solve_opf(net, ClearingModelKind::FlexibleDemand);
}

AllocationResult allocate_transportation(const std::vector<double>& p_g,
                                         const std::vector<double>& p_d,
                                         const std::vector<double>& e_g,
                                         const std::vector<double>& c_co2) {
  return allocate_weighted(p_g, p_d, e_g, c_co2, c_co2);
}

namespace detail {

DispatchSolution solve_flexible_with_coeffs(
    const Network& net, const std::vector<double>& demand_coeffs,
    const std::vector<double>& gen_cost_adders) {
  if (demand_coeffs.size() != net.consumers.size()) {
    throw InputError("demand coefficient vector does not match consumers");
  }
  if (!gen_cost_adders.empty() &&
      gen_cost_adders.size() != net.generators.size()) {
    throw InputError("generation adder vector does not match generators");
  }
  return solve_opf(net, ClearingModelKind::FlexibleDemand, &demand_coeffs,
                   gen_cost_adders.empty() ? nullptr : &gen_cost_adders);
}

}  // namespace detail

}  // namespace carbonclear

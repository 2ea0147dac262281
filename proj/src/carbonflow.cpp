#include "carbonclear/carbonflow.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "carbonclear/clearing.hpp"
#include "carbonclear/errors.hpp"
#include "clearing_detail.hpp"

namespace carbonclear {

namespace {

struct BusFlows {
  std::vector<double> generation;     // MW produced at the bus
  std::vector<double> gen_emissions;  // tons emitted at the bus
  std::vector<double> load;           // MW consumed at the bus
  std::vector<double> inflow;         // MW arriving over lines
  // inflows[i] lists (source bus, MW) for every line delivering into i.
  std::vector<std::vector<std::pair<int, double>>> inflows;
};

BusFlows collect_bus_flows(const Network& net, const std::vector<double>& p_g,
                           const std::vector<double>& p_d,
                           const std::vector<double>& flows) {
  const std::size_t nb = net.buses.size();
  BusFlows bf;
  bf.generation.assign(nb, 0.0);
  bf.gen_emissions.assign(nb, 0.0);
  bf.load.assign(nb, 0.0);
  bf.inflow.assign(nb, 0.0);
  bf.inflows.resize(nb);
  for (std::size_t m = 0; m < net.generators.size(); ++m) {
    const int b = net.bus_index(net.generators[m].bus);
    bf.generation[b] += p_g[m];
    bf.gen_emissions[b] += net.generators[m].emission_intensity * p_g[m];
  }
  for (std::size_t n = 0; n < net.consumers.size(); ++n) {
    bf.load[net.bus_index(net.consumers[n].bus)] += p_d[n];
  }
  for (std::size_t l = 0; l < net.lines.size(); ++l) {
    const int a = net.bus_index(net.lines[l].from_bus);
    const int b = net.bus_index(net.lines[l].to_bus);
    const double f = flows[l];
    if (f > 0.0) {
      bf.inflow[b] += f;
      bf.inflows[b].emplace_back(a, f);
    } else if (f < 0.0) {
      bf.inflow[a] += -f;
      bf.inflows[a].emplace_back(b, -f);
    }
  }
  return bf;
}

double self_consistent_objective(const Network& net,
                                 const DispatchSolution& d,
                                 const std::vector<double>& lambda) {
  double obj = 0.0;
  for (std::size_t n = 0; n < net.consumers.size(); ++n) {
    const Consumer& c = net.consumers[n];
    obj += (c.utility - c.carbon_cost * lambda[net.bus_index(c.bus)]) *
           d.p_d[n];
  }
  for (std::size_t m = 0; m < net.generators.size(); ++m) {
    obj -= net.generators[m].cost * d.p_g[m];
  }
  return obj;
}

double balance_residual(const BusFlows& bf,
                        const std::vector<double>& lambda) {
  double worst = 0.0;
  for (std::size_t i = 0; i < bf.generation.size(); ++i) {
    double carbon_in = bf.gen_emissions[i];
    for (const auto& [src, mw] : bf.inflows[i]) {
      carbon_in += lambda[src] * mw;
    }
    const double through = bf.generation[i] + bf.inflow[i];
    worst = std::max(worst, std::abs(lambda[i] * through - carbon_in));
  }
  return worst;
}

}  // namespace

std::vector<double> nodal_intensities(const Network& net,
                                      const std::vector<double>& p_g,
                                      const std::vector<double>& p_d,
                                      const std::vector<double>& flows,
                                      std::vector<int>* zero_throughflow) {
  const std::size_t nb = net.buses.size();
  if (p_g.size() != net.generators.size() ||
      p_d.size() != net.consumers.size() || flows.size() != net.lines.size()) {
    throw InputError("nodal_intensities: vector lengths do not match network");
  }
  const BusFlows bf = collect_bus_flows(net, p_g, p_d, flows);

  double total_gen = 0.0;
  for (double v : p_g) total_gen += v;
  const double balance_tol = kFeasTol * std::max(1.0, total_gen);
  for (std::size_t i = 0; i < nb; ++i) {
    double out = 0.0;
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
      const int a = net.bus_index(net.lines[l].from_bus);
      const int b = net.bus_index(net.lines[l].to_bus);
      if (static_cast<int>(i) == a) out += flows[l];
      if (static_cast<int>(i) == b) out -= flows[l];
    }
    const double imbalance = bf.generation[i] - bf.load[i] - out;
    if (std::abs(imbalance) > balance_tol) {
      throw InputError("nodal_intensities: bus " + net.buses[i].id +
                       " violates power balance by " +
                       std::to_string(imbalance) + " MW");
    }
  }

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nb, nb);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    const double through = bf.generation[i] + bf.inflow[i];
    if (through <= kFeasTol) {
      A(i, i) = 1.0;
      b[i] = 0.0;
      if (zero_throughflow) {
        zero_throughflow->push_back(static_cast<int>(i));
      }
      continue;
    }
    A(i, i) = through;
    for (const auto& [src, mw] : bf.inflows[i]) {
      A(i, src) -= mw;
    }
    b[i] = bf.gen_emissions[i];
  }

  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  Eigen::VectorXd x = lu.solve(b);
  const double res = (A * x - b).cwiseAbs().maxCoeff();
  if (!x.allFinite() || res > 1e-6 * std::max(1.0, b.cwiseAbs().maxCoeff())) {
    throw InternalError(
        "nodal_intensities: singular carbon balance system (residual " +
        std::to_string(res) + ")");
  }

  std::vector<double> lambda(nb, 0.0);
  for (std::size_t i = 0; i < nb; ++i) {
    if (x[i] < -1e-7) {
      throw InternalError("nodal_intensities: negative intensity at bus " +
                          net.buses[i].id);
    }
    lambda[i] = std::max(x[i], 0.0);
  }
  return lambda;
}

CarbonFlowSolution clear_carbon_flow(const Network& net,
                                     const CarbonFlowConfig& cfg) {
  if (cfg.max_iterations < 1) {
    throw InputError("carbon flow: max_iterations must be at least 1");
  }
  if (!(cfg.lambda_tolerance > 0.0)) {
    throw InputError("carbon flow: lambda_tolerance must be positive");
  }

  const std::size_t nb = net.buses.size();
  const std::size_t nd = net.consumers.size();
  const std::size_t ng = net.generators.size();

  std::vector<double> init(nb, 0.0);
  if (cfg.initialization == LambdaInit::FromFlexibleDispatch) {
    const DispatchSolution flex = clear_flexible_demand(net);
    init = nodal_intensities(net, flex.p_g, flex.p_d, flex.line_flows);
  }

  CarbonFlowSolution out;
  double best_obj = -std::numeric_limits<double>::infinity();
  int iteration = 0;
  std::size_t best_phase = 0;

  // The frozen-lambda LP prices generation at cost only, so its fixed
  // points are always plain merit-order dispatches. Additional passes
  // price generation at cost plus a multiple of sigma * intensity, sigma
  // being the demand-weighted mean carbon cost: the first-order value of
  // lowering the intensities consumers are charged through. Every pass
  // yields honest feasible iterates of the bilinear problem; the best
  // self-consistent one is returned.
  double weighted_cost = 0.0, weighted_demand = 0.0;
  for (const Consumer& c : net.consumers) {
    weighted_cost += c.carbon_cost * c.p_max;
    weighted_demand += c.p_max;
  }
  const double sigma =
      weighted_demand > 0.0 ? weighted_cost / weighted_demand : 0.0;
  const std::vector<double> internalization = {0.0, 0.5, 1.0, 2.0};
  std::vector<bool> phase_settled(internalization.size(), false);

  for (std::size_t phase = 0; phase < internalization.size(); ++phase) {
    if (phase > 0 && sigma == 0.0) break;
    std::vector<double> gen_adders(ng, 0.0);
    for (std::size_t m = 0; m < ng; ++m) {
      gen_adders[m] = internalization[phase] * sigma *
                      net.generators[m].emission_intensity;
    }
    std::vector<double> lambda = init;
    for (int k = 1; k <= cfg.max_iterations; ++k) {
      std::vector<double> coeffs(nd, 0.0);
      for (std::size_t n = 0; n < nd; ++n) {
        const Consumer& c = net.consumers[n];
        coeffs[n] =
            c.utility - c.carbon_cost * lambda[net.bus_index(c.bus)];
      }
      DispatchSolution d =
          detail::solve_flexible_with_coeffs(net, coeffs, gen_adders);

      std::vector<int> zero_buses;
      std::vector<double> next =
          nodal_intensities(net, d.p_g, d.p_d, d.line_flows, &zero_buses);

      double delta = 0.0;
      for (std::size_t i = 0; i < nb; ++i) {
        delta = std::max(delta, std::abs(next[i] - lambda[i]));
      }
      const BusFlows bf = collect_bus_flows(net, d.p_g, d.p_d, d.line_flows);
      const double residual = balance_residual(bf, next);
      const double obj = self_consistent_objective(net, d, next);

      out.trace.push_back({++iteration, obj, delta, residual, next});
      out.iterations = iteration;

      if (obj > best_obj) {
        best_obj = obj;
        best_phase = phase;
        out.dispatch = std::move(d);
        out.lambda_e = next;
        out.residual = residual;
        out.zero_throughflow_buses = zero_buses;
      }
      if (delta < cfg.lambda_tolerance) {
        phase_settled[phase] = true;
        break;
      }
      // Half-step relaxation: keeps the same fixed points but breaks the
      // two-cycles that plain substitution falls into when consumers flip
      // between consuming and curtailing.
      if (k >= 3) {
        for (std::size_t i = 0; i < nb; ++i) {
          next[i] = 0.5 * (lambda[i] + next[i]);
        }
      }
      lambda = next;
    }
  }
  // Converged means: the pass that produced the returned iterate reached
  // the lambda tolerance.
  out.converged = phase_settled[best_phase];

  // Finalize the best iterate: consumer emissions from its own intensities.
  DispatchSolution& d = out.dispatch;
  d.allocation.clear();
  d.e_d.assign(nd, 0.0);
  d.objective_terms.carbon = 0.0;
  for (std::size_t n = 0; n < nd; ++n) {
    const Consumer& c = net.consumers[n];
    d.e_d[n] = out.lambda_e[net.bus_index(c.bus)] * d.p_d[n];
    d.objective_terms.carbon += c.carbon_cost * d.e_d[n];
  }
  d.objective = d.objective_terms.welfare();
  return out;
}

void write_trace_csv(const CarbonFlowSolution& sol, const Network& net,
                     std::ostream& os) {
  os << "iteration,objective,lambda_delta,residual";
  for (const Bus& b : net.buses) os << ",lambda[" << b.id << "]";
  os << "\n";
  for (const auto& p : sol.trace) {
    os << p.iteration << "," << p.objective << "," << p.lambda_delta << ","
       << p.residual;
    for (double v : p.lambda) os << "," << v;
    os << "\n";
  }
}

}  // namespace carbonclear

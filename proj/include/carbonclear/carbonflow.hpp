#pragma once

#include <ostream>
#include <vector>

#include "carbonclear/model.hpp"

namespace carbonclear {

enum class LambdaInit { ZeroLambda, FromFlexibleDispatch };

struct CarbonFlowConfig {
  int max_iterations = 100;        // cap per pricing pass
  double lambda_tolerance = 1e-6;  // tons/MWh, convergence on max |delta|
  LambdaInit initialization = LambdaInit::FromFlexibleDispatch;
};

/// Nodal carbon intensities for a fixed dispatch under proportional sharing:
/// at every bus, carbon attached to local generation plus carbon carried by
/// incoming flows is spread uniformly over the bus throughflow. Buses with
/// zero throughflow get intensity zero; their indices are appended to
/// `zero_throughflow` when given. Inputs must satisfy nodal power balance.
std::vector<double> nodal_intensities(
    const Network& net, const std::vector<double>& p_g,
    const std::vector<double>& p_d, const std::vector<double>& flows,
    std::vector<int>* zero_throughflow = nullptr);

/// Clears the carbon-flow benchmark by alternating between the dispatch LP
/// with frozen nodal intensities and recomputing intensities from the
/// resulting flows. Returns the iterate with the best self-consistent
/// objective; makes no global-optimality claim. Non-convergence is reported
/// through `converged`, not as an error.
CarbonFlowSolution clear_carbon_flow(const Network& net,
                                     const CarbonFlowConfig& cfg = {});

/// Writes the per-iteration trace (objective, step size, residual and the
/// nodal intensity vector) as CSV.
void write_trace_csv(const CarbonFlowSolution& sol, const Network& net,
                     std::ostream& os);

}  // namespace carbonclear

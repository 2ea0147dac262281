#pragma once

#include <string>
#include <vector>

#include "carbonclear/model.hpp"

namespace carbonclear {

enum class ClearingModelKind { CarbonCost, FixedDemand, FlexibleDemand };

std::string to_string(ClearingModelKind kind);

/// Clears the market with consumer carbon costs: maximizes
/// utility - carbon cost - generation cost over dispatch, angles and the
/// generator-to-consumer allocation matrix, subject to DC network limits
/// and allocation balance. Throws InfeasibleError when no dispatch exists.
DispatchSolution clear_carbon_cost(const Network& net);

/// Least-cost dispatch with every consumer pinned at its maximum demand.
DispatchSolution clear_fixed_demand(const Network& net);

/// Welfare-maximizing dispatch with flexible demand and no carbon terms.
DispatchSolution clear_flexible_demand(const Network& net);

struct AllocationResult {
  std::vector<std::vector<double>> allocation;  // MW, generators x consumers
  std::vector<double> e_d;                      // tons per consumer
  double carbon_term = 0.0;  // sum of carbon_cost[n] * e_d[n]
};

/// Solves the inner generation-to-consumer allocation for a fixed dispatch:
/// minimizes the total carbon cost over all matrices with the given row and
/// column sums. Uses the greedy fill over generators sorted by emission
/// intensity (ascending) and consumers sorted by carbon cost (descending);
/// the cost structure makes that greedy exact. Ties break on index.
AllocationResult allocate_transportation(const std::vector<double>& p_g,
                                         const std::vector<double>& p_d,
                                         const std::vector<double>& e_g,
                                         const std::vector<double>& c_co2);

}  // namespace carbonclear

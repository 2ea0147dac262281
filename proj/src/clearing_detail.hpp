#pragma once

#include <vector>

#include "carbonclear/model.hpp"

namespace carbonclear::detail {

// Flexible-demand OPF with caller-supplied objective coefficients on the
// demand variables and optional adders on the generation costs (used by
// the carbon-flow fixed point, where consumer utility is adjusted by the
// frozen nodal intensity and generation may be priced with an internalized
// carbon value). Reported objective terms use the network's true data.
DispatchSolution solve_flexible_with_coeffs(
    const Network& net, const std::vector<double>& demand_coeffs,
    const std::vector<double>& gen_cost_adders = {});

}  // namespace carbonclear::detail

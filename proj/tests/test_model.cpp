#include <doctest.h>

#include <algorithm>

#include "carbonclear/errors.hpp"
#include "carbonclear/model.hpp"

using namespace carbonclear;

namespace {

bool has_code(const std::vector<Violation>& vs, const std::string& code) {
  return std::any_of(vs.begin(), vs.end(),
                     [&](const Violation& v) { return v.code == code; });
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("built-in three-bus case is valid and matches the study data") {
  const Network net = builtin_three_bus();
  CHECK(validate_network(net).empty());

  double total_demand = 0.0;
  for (const Consumer& d : net.consumers) total_demand += d.p_max;
  CHECK(total_demand == doctest::Approx(48.0));

  const Generator* at_bus3 = nullptr;
  for (const Generator& g : net.generators) {
    if (g.bus == "3") at_bus3 = &g;
  }
  REQUIRE(at_bus3 != nullptr);
  CHECK(at_bus3->emission_intensity == doctest::Approx(0.2));
  CHECK(net.reference_index() == 0);
}

TEST_CASE("three-bus line overrides are validated") {
  std::array<LineParams, 3> params{};
  params[1].flow_limit = -5.0;
  CHECK_THROWS_AS(builtin_three_bus(params), InputError);
}

TEST_CASE("validation reports every violation with a code") {
  Network net = builtin_three_bus();
  net.buses[1].is_reference = true;  // second reference
  net.generators[0].p_min = 10.0;
  net.generators[0].p_max = 5.0;  // inverted bounds
  const auto vs = validate_network(net);
  CHECK(has_code(vs, "multiple-reference"));
  CHECK(has_code(vs, "bound-order"));
}

TEST_CASE("unknown endpoints, self-loops and disconnection are caught") {
  Network net = builtin_three_bus();
  net.lines[0].to_bus = "1";  // self loop
  net.lines[1].to_bus = "9";  // unknown bus
  auto vs = validate_network(net);
  CHECK(has_code(vs, "self-loop"));
  CHECK(has_code(vs, "unknown-bus"));

  Network split = builtin_three_bus();
  split.lines.clear();
  vs = validate_network(split);
  CHECK(has_code(vs, "disconnected"));
}

TEST_CASE("negative participant data is caught") {
  Network net = builtin_three_bus();
  net.consumers[0].carbon_cost = -1.0;
  net.generators[1].emission_intensity = -0.1;
  const auto vs = validate_network(net);
  CHECK(has_code(vs, "negative-carbon-cost"));
  CHECK(has_code(vs, "negative-emission"));
}

TEST_CASE("check_solution accepts a hand-built consistent dispatch") {
  const Network net = builtin_three_bus();
  DispatchSolution sol;
  // All demand at one bus served locally: d1=6 from g1, d2=24 from g2
  // would exceed capacity, so use a balanced no-flow dispatch.
  sol.p_g = {6.0, 10.0, 18.0};
  sol.p_d = {6.0, 10.0, 18.0};
  sol.theta = {0.0, 0.0, 0.0};
  sol.line_flows = {0.0, 0.0, 0.0};
  sol.allocation = {{6.0, 0.0, 0.0}, {0.0, 10.0, 0.0}, {0.0, 0.0, 18.0}};
  sol.e_d = {3.6, 10.0, 3.6};
  // p_d for d2 is below its 16 MW minimum: expect exactly that violation.
  auto vs = check_solution(net, sol, true);
  REQUIRE(vs.size() == 1);
  CHECK(vs[0].code == "consumer-bounds");

  DispatchSolution bad = sol;
  bad.allocation[0][0] = 5.0;  // row sum broken
  vs = check_solution(net, bad, true);
  CHECK(has_code(vs, "allocation-row-sum"));
  CHECK(has_code(vs, "allocation-col-sum"));
}

TEST_SUITE_END();

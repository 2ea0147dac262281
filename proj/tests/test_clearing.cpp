#include <doctest.h>

#include <cmath>
#include <numeric>

#include "carbonclear/clearing.hpp"
#include "carbonclear/errors.hpp"
#include "carbonclear/lp.hpp"
#include "carbonclear/rng.hpp"

using namespace carbonclear;
namespace clp = carbonclear::lp;

namespace {

double total(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

// Transportation optimum through the LP solver; independent of the greedy.
double transportation_lp_cost(const std::vector<double>& p_g,
                              const std::vector<double>& p_d,
                              const std::vector<double>& e_g,
                              const std::vector<double>& c) {
  const int ng = static_cast<int>(p_g.size());
  const int nd = static_cast<int>(p_d.size());
  clp::LinearProgram prog;
  for (int m = 0; m < ng; ++m) {
    for (int n = 0; n < nd; ++n) {
      prog.add_variable(0.0, clp::kInf, c[n] * e_g[m]);
    }
  }
  for (int m = 0; m < ng; ++m) {
    clp::Constraint row;
    row.relation = clp::Relation::Equal;
    row.rhs = p_g[m];
    for (int n = 0; n < nd; ++n) row.coeffs.emplace_back(m * nd + n, 1.0);
    prog.add_constraint(row);
  }
  for (int n = 0; n < nd; ++n) {
    clp::Constraint col;
    col.relation = clp::Relation::Equal;
    col.rhs = p_d[n];
    for (int m = 0; m < ng; ++m) col.coeffs.emplace_back(m * nd + n, 1.0);
    prog.add_constraint(col);
  }
  const clp::Solution s = clp::solve_lp(prog);
  REQUIRE(s.status == clp::Status::Optimal);
  return s.objective;
}

Network three_bus_with_costs(double c1, double c2, double c3) {
  Network net = builtin_three_bus();
  net.consumers[0].carbon_cost = c1;
  net.consumers[1].carbon_cost = c2;
  net.consumers[2].carbon_cost = c3;
  return net;
}

}  // namespace

TEST_SUITE_BEGIN("clearing");

TEST_CASE("three-bus merit order with zero carbon costs") {
  const Network net = builtin_three_bus();
  const DispatchSolution sol = clear_carbon_cost(net);

  CHECK(total(sol.p_d) == doctest::Approx(48.0).epsilon(1e-9));
  CHECK(sol.p_g[0] == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(sol.p_g[1] == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(sol.p_g[2] == doctest::Approx(25.0).epsilon(1e-9));
  CHECK(sol.objective_terms.generation_cost ==
        doctest::Approx(340.0).epsilon(1e-9));
  double carbon = 0.0;
  for (std::size_t m = 0; m < net.generators.size(); ++m) {
    carbon += net.generators[m].emission_intensity * sol.p_g[m];
  }
  CHECK(carbon == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(sol.allocation_degenerate);
  CHECK(check_solution(net, sol, true).empty());
}

TEST_CASE("fixed demand pins consumption and omits the allocation") {
  const Network net = builtin_three_bus();
  const DispatchSolution sol = clear_fixed_demand(net);
  for (std::size_t n = 0; n < net.consumers.size(); ++n) {
    CHECK(sol.p_d[n] == doctest::Approx(net.consumers[n].p_max));
  }
  CHECK(!sol.has_allocation());
  CHECK(sol.e_d.empty());
  CHECK(sol.objective_terms.generation_cost ==
        doctest::Approx(340.0).epsilon(1e-9));
}

TEST_CASE("flexible demand consumes fully when utilities beat costs") {
  const Network net = builtin_three_bus();
  const DispatchSolution sol = clear_flexible_demand(net);
  for (std::size_t n = 0; n < net.consumers.size(); ++n) {
    CHECK(sol.p_d[n] == doctest::Approx(net.consumers[n].p_max));
  }
}

TEST_CASE("worthless demand with a zero floor is not served") {
  Network net = builtin_three_bus();
  net.consumers[0].utility = 2.0;  // below every generator cost
  net.consumers[0].p_min = 0.0;
  const DispatchSolution sol = clear_flexible_demand(net);
  CHECK(sol.p_d[0] == doctest::Approx(0.0));
}

TEST_CASE("zero carbon costs reproduce the flexible objective exactly") {
  const Network net = builtin_three_bus();
  const double carbon = clear_carbon_cost(net).objective;
  const double flexible = clear_flexible_demand(net).objective;
  CHECK(std::abs(carbon - flexible) <=
        1e-8 * std::max(1.0, std::abs(flexible)));

  // Same claim under congestion.
  std::array<LineParams, 3> lines{};
  for (auto& l : lines) l.flow_limit = 6.0;
  Network tight = builtin_three_bus(lines);
  const double c2 = clear_carbon_cost(tight).objective;
  const double f2 = clear_flexible_demand(tight).objective;
  CHECK(std::abs(c2 - f2) <= 1e-8 * std::max(1.0, std::abs(f2)));
}

TEST_CASE("carbon costs steer clean energy to the high bidders") {
  const Network net = three_bus_with_costs(5.0, 0.0, 20.0);
  const DispatchSolution sol = clear_carbon_cost(net);
  REQUIRE(check_solution(net, sol, true).empty());

  // Allocation equals the transportation optimum for the solved dispatch.
  std::vector<double> e_g, c;
  for (const Generator& g : net.generators) {
    e_g.push_back(g.emission_intensity);
  }
  for (const Consumer& d : net.consumers) c.push_back(d.carbon_cost);
  const AllocationResult inner =
      allocate_transportation(sol.p_g, sol.p_d, e_g, c);
  CHECK(std::abs(inner.carbon_term - sol.objective_terms.carbon) <= 1e-6);

  // The zero-cost consumer carries the dirtiest bundle per MWh.
  const double r1 = sol.e_d[0] / sol.p_d[0];
  const double r2 = sol.e_d[1] / sol.p_d[1];
  const double r3 = sol.e_d[2] / sol.p_d[2];
  CHECK(r2 >= r1 - 1e-9);
  CHECK(r1 >= r3 - 1e-9);
}

TEST_CASE("componentwise larger carbon costs never raise the objective") {
  for (int i = 0; i < 6; ++i) {
    Rng rng(derive_seed(555, {static_cast<std::uint64_t>(i)}));
    const double a = rng.uniform(0.0, 30.0);
    const double b = rng.uniform(0.0, 30.0);
    const double c = rng.uniform(0.0, 30.0);
    const Network low = three_bus_with_costs(a, b, c);
    const Network high = three_bus_with_costs(a + rng.uniform(0.0, 20.0),
                                              b + rng.uniform(0.0, 20.0),
                                              c + rng.uniform(0.0, 20.0));
    const double obj_low = clear_carbon_cost(low).objective;
    const double obj_high = clear_carbon_cost(high).objective;
    CHECK(obj_high <= obj_low + 1e-7 * std::max(1.0, std::abs(obj_low)));
  }
}

TEST_CASE("fixed-demand dispatch cost is dominant") {
  const Network net = builtin_three_bus();
  const double optimal = clear_fixed_demand(net).objective_terms.generation_cost;
  for (int i = 0; i < 4; ++i) {
    Rng rng(derive_seed(808, {static_cast<std::uint64_t>(i)}));
    Network jittered = net;
    for (Generator& g : jittered.generators) {
      g.cost *= rng.uniform(0.5, 2.0);
    }
    const DispatchSolution alt = clear_fixed_demand(jittered);
    double true_cost = 0.0;
    for (std::size_t m = 0; m < net.generators.size(); ++m) {
      true_cost += net.generators[m].cost * alt.p_g[m];
    }
    CHECK(optimal <= true_cost + 1e-7 * std::max(1.0, true_cost));
  }
}

TEST_CASE("undeliverable demand floor is infeasible with a certificate") {
  Network net = builtin_three_bus();
  net.consumers[1].p_min = 50.0;
  net.consumers[1].p_max = 55.0;  // total floor now exceeds capacity
  try {
    clear_carbon_cost(net);
    FAIL("expected InfeasibleError");
  } catch (const InfeasibleError& e) {
    CHECK(!e.families().empty());
  }
}

TEST_CASE("congestion forces remote expensive generation") {
  std::array<LineParams, 3> lines{};
  lines[0].flow_limit = 8.0;    // 1-2
  lines[1].flow_limit = 100.0;  // 1-3
  lines[2].flow_limit = 8.0;    // 2-3
  const Network net = builtin_three_bus(lines);
  const DispatchSolution sol = clear_fixed_demand(net);
  // Solving the triangle flow equations by hand with g3 = 25:
  // f12 = (41 - 2x)/3 and f23 = (x - 31)/3 for g2 = x, so the 8 MW limit
  // on line 1-2 pins the cheapest feasible dispatch at x = 8.5.
  CHECK(sol.p_g[1] == doctest::Approx(8.5).epsilon(1e-9));
  CHECK(sol.objective_terms.generation_cost ==
        doctest::Approx(351.0).epsilon(1e-9));
  for (std::size_t l = 0; l < net.lines.size(); ++l) {
    CHECK(std::abs(sol.line_flows[l]) <=
          net.lines[l].flow_limit + 1e-6);
  }
}

TEST_SUITE_END();

TEST_SUITE_BEGIN("allocation");

TEST_CASE("clean supply goes to the highest carbon cost") {
  const AllocationResult r = allocate_transportation(
      {10.0, 10.0}, {10.0, 10.0}, {0.0, 1.0}, {0.0, 100.0});
  CHECK(r.allocation[0][1] == doctest::Approx(10.0));
  CHECK(r.allocation[1][0] == doctest::Approx(10.0));
  CHECK(r.e_d[0] == doctest::Approx(10.0));
  CHECK(r.e_d[1] == doctest::Approx(0.0));
}

TEST_CASE("uniform carbon costs make the term independent of the matrix") {
  const std::vector<double> p_g{4.0, 6.0}, p_d{3.0, 7.0}, e{0.5, 0.9};
  const AllocationResult r =
      allocate_transportation(p_g, p_d, e, {12.0, 12.0});
  const double expected = 12.0 * (0.5 * 4.0 + 0.9 * 6.0);
  CHECK(r.carbon_term == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("supply and demand must match") {
  CHECK_THROWS_AS(
      allocate_transportation({10.0}, {9.0}, {0.5}, {1.0}),
      InputError);
}

TEST_CASE("greedy equals the transportation LP on random instances") {
  for (int i = 0; i < 60; ++i) {
    Rng rng(derive_seed(31337, {static_cast<std::uint64_t>(i)}));
    const int ng = 1 + static_cast<int>(rng.below(4));
    const int nd = 1 + static_cast<int>(rng.below(4));
    std::vector<double> p_g(ng), p_d(nd), e(ng), c(nd);
    double supply = 0.0;
    for (double& v : p_g) {
      v = rng.uniform(0.0, 20.0);
      supply += v;
    }
    double demand = 0.0;
    for (double& v : p_d) {
      v = rng.uniform(0.1, 20.0);
      demand += v;
    }
    for (double& v : p_d) v *= supply / demand;  // exact balance
    for (double& v : e) v = rng.uniform(0.0, 1.2);
    for (double& v : c) v = rng.uniform(0.0, 80.0);

    const AllocationResult greedy = allocate_transportation(p_g, p_d, e, c);
    const double lp_cost = transportation_lp_cost(p_g, p_d, e, c);
    CHECK_MESSAGE(std::abs(greedy.carbon_term - lp_cost) <=
                      1e-8 * std::max(1.0, std::abs(lp_cost)),
                  "instance ", i, ": greedy ", greedy.carbon_term, " vs lp ",
                  lp_cost);
  }
}

TEST_SUITE_END();

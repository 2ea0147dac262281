#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "carbonclear/carbonflow.hpp"
#include "carbonclear/clearing.hpp"
#include "carbonclear/errors.hpp"

using namespace carbonclear;

namespace {

// Independent reference for the nodal intensity system: assembles the
// carbon balance directly from angles/loads and solves it with a local
// Gauss-Jordan elimination.
std::vector<double> reference_intensities(const Network& net,
                                          const std::vector<double>& p_g,
                                          const std::vector<double>& p_d,
                                          const std::vector<double>& theta) {
  const std::size_t nb = net.buses.size();
  std::vector<std::vector<double>> a(nb, std::vector<double>(nb + 1, 0.0));
  std::vector<double> load(nb, 0.0), emis(nb, 0.0), through(nb, 0.0);
  for (std::size_t n = 0; n < net.consumers.size(); ++n) {
    load[net.bus_index(net.consumers[n].bus)] += p_d[n];
  }
  for (std::size_t m = 0; m < net.generators.size(); ++m) {
    emis[net.bus_index(net.generators[m].bus)] +=
        net.generators[m].emission_intensity * p_g[m];
    through[net.bus_index(net.generators[m].bus)] += p_g[m];
  }
  for (std::size_t i = 0; i < nb; ++i) a[i][i] += load[i];
  for (const Line& l : net.lines) {
    const int u = net.bus_index(l.from_bus);
    const int v = net.bus_index(l.to_bus);
    const double f = l.susceptance * (theta[u] - theta[v]);
    if (f > 0.0) {  // u -> v: leaves u with lambda_u, enters v from u
      a[u][u] += f;
      a[v][v] += 0.0;
      a[v][u] -= f;
      through[v] += f;
    } else if (f < 0.0) {
      a[v][v] += -f;
      a[u][v] -= -f;
      through[u] += -f;
    }
  }
  for (std::size_t i = 0; i < nb; ++i) {
    if (through[i] <= 1e-6) {
      for (std::size_t j = 0; j < nb; ++j) a[i][j] = 0.0;
      a[i][i] = 1.0;
      a[i][nb] = 0.0;
    } else {
      a[i][nb] = emis[i];
    }
  }
  // Gauss-Jordan with partial pivoting.
  for (std::size_t col = 0; col < nb; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < nb; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    std::swap(a[piv], a[col]);
    REQUIRE(std::abs(a[col][col]) > 1e-12);
    const double d = a[col][col];
    for (std::size_t j = col; j <= nb; ++j) a[col][j] /= d;
    for (std::size_t r = 0; r < nb; ++r) {
      if (r == col || a[r][col] == 0.0) continue;
      const double f = a[r][col];
      for (std::size_t j = col; j <= nb; ++j) a[r][j] -= f * a[col][j];
    }
  }
  std::vector<double> lambda(nb);
  for (std::size_t i = 0; i < nb; ++i) lambda[i] = a[i][nb];
  return lambda;
}

Network two_bus_chain() {
  Network net;
  net.buses = {{"1", true}, {"2", false}};
  net.lines = {{"1-2", "1", "2", 1.0, 100.0}};
  net.generators = {{"g1", "1", 5.0, 0.0, 20.0, 1.0}};
  net.consumers = {{"d1", "1", 30.0, 0.0, 5.0, 0.0},
                   {"d2", "2", 30.0, 0.0, 5.0, 0.0}};
  return net;
}

}  // namespace

TEST_SUITE_BEGIN("carbonflow");

TEST_CASE("single bus inherits its generator intensity") {
  Network net;
  net.buses = {{"1", true}};
  net.generators = {{"g1", "1", 5.0, 0.0, 20.0, 0.5}};
  net.consumers = {{"d1", "1", 30.0, 0.0, 15.0, 0.0}};
  const auto lambda = nodal_intensities(net, {10.0}, {10.0}, {});
  CHECK(lambda[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("a single source propagates its intensity downstream") {
  const Network net = two_bus_chain();
  const auto lambda = nodal_intensities(net, {10.0}, {5.0, 5.0}, {5.0});
  CHECK(lambda[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lambda[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("unbalanced inputs are rejected") {
  const Network net = two_bus_chain();
  CHECK_THROWS_AS(nodal_intensities(net, {10.0}, {5.0, 5.0}, {1.0}),
                  InputError);
}

TEST_CASE("matches the dense reference solve on a meshed dispatch") {
  std::array<LineParams, 3> lines{};
  lines[0].flow_limit = 8.0;
  lines[1].flow_limit = 100.0;
  lines[2].flow_limit = 8.0;
  const Network net = builtin_three_bus(lines);
  const DispatchSolution sol = clear_fixed_demand(net);

  const auto lambda =
      nodal_intensities(net, sol.p_g, sol.p_d, sol.line_flows);
  const auto ref = reference_intensities(net, sol.p_g, sol.p_d, sol.theta);
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    CHECK(lambda[i] == doctest::Approx(ref[i]).epsilon(1e-9));
  }
}

TEST_CASE("uniform generator intensity is a fixed point") {
  Network net = builtin_three_bus();
  for (Generator& g : net.generators) g.emission_intensity = 0.7;
  for (Consumer& d : net.consumers) d.carbon_cost = 3.0;
  const CarbonFlowSolution s = clear_carbon_flow(net);
  CHECK(s.converged);
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const bool zero =
        std::find(s.zero_throughflow_buses.begin(),
                  s.zero_throughflow_buses.end(),
                  static_cast<int>(i)) != s.zero_throughflow_buses.end();
    if (!zero) {
      CHECK(s.lambda_e[i] == doctest::Approx(0.7).epsilon(1e-9));
    }
  }
  for (std::size_t n = 0; n < net.consumers.size(); ++n) {
    CHECK(s.dispatch.e_d[n] ==
          doctest::Approx(0.7 * s.dispatch.p_d[n]).epsilon(1e-9));
  }
}

TEST_CASE("zero carbon costs recover the flexible objective") {
  const Network net = builtin_three_bus();
  const CarbonFlowSolution s = clear_carbon_flow(net);
  const double flexible = clear_flexible_demand(net).objective;
  CHECK(std::abs(s.dispatch.objective - flexible) <=
        1e-8 * std::max(1.0, std::abs(flexible)));
}

TEST_CASE("congested case: consistent, bounded and dominated") {
  std::array<LineParams, 3> lines{};
  lines[0].flow_limit = 8.0;
  lines[1].flow_limit = 100.0;
  lines[2].flow_limit = 8.0;
  Network net = builtin_three_bus(lines);
  net.consumers[0].carbon_cost = 5.0;
  net.consumers[1].carbon_cost = 10.0;
  net.consumers[2].carbon_cost = 20.0;

  const CarbonFlowSolution s = clear_carbon_flow(net);
  // (4b) holds exactly by construction.
  for (std::size_t n = 0; n < net.consumers.size(); ++n) {
    const int b = net.bus_index(net.consumers[n].bus);
    CHECK(s.dispatch.e_d[n] == s.lambda_e[b] * s.dispatch.p_d[n]);
  }
  CHECK(s.residual <= 1e-6 * std::max(1.0, 48.0));

  // Intensities stay inside the dispatched generator range.
  double lo = 1e30, hi = 0.0;
  for (std::size_t m = 0; m < net.generators.size(); ++m) {
    if (s.dispatch.p_g[m] > 1e-9) {
      lo = std::min(lo, net.generators[m].emission_intensity);
      hi = std::max(hi, net.generators[m].emission_intensity);
    }
  }
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const bool zero =
        std::find(s.zero_throughflow_buses.begin(),
                  s.zero_throughflow_buses.end(),
                  static_cast<int>(i)) != s.zero_throughflow_buses.end();
    if (zero) continue;
    CHECK(s.lambda_e[i] >= lo - 1e-9);
    CHECK(s.lambda_e[i] <= hi + 1e-9);
  }

  // The optimal-allocation model can always replicate a carbon-flow
  // allocation, so its objective dominates.
  const DispatchSolution cc = clear_carbon_cost(net);
  CHECK(s.dispatch.objective <= cc.objective + 1e-8);
}

TEST_CASE("iteration cap reports non-convergence honestly") {
  Network net = builtin_three_bus();
  net.consumers[0].carbon_cost = 5.0;
  net.consumers[1].carbon_cost = 10.0;
  net.consumers[2].carbon_cost = 20.0;
  CarbonFlowConfig cfg;
  cfg.max_iterations = 1;
  cfg.initialization = LambdaInit::ZeroLambda;
  const CarbonFlowSolution s = clear_carbon_flow(net, cfg);
  CHECK(!s.converged);
  // One capped iteration per pricing pass; the cap applies to each pass.
  CHECK(s.iterations == static_cast<int>(s.trace.size()));
  CHECK(s.iterations >= 1);
  CHECK(check_solution(net, s.dispatch, false).empty());
}

TEST_CASE("config validation") {
  const Network net = builtin_three_bus();
  CarbonFlowConfig cfg;
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(clear_carbon_flow(net, cfg), InputError);
  cfg.max_iterations = 10;
  cfg.lambda_tolerance = 0.0;
  CHECK_THROWS_AS(clear_carbon_flow(net, cfg), InputError);
}

TEST_CASE("trace exports one row per iteration") {
  Network net = builtin_three_bus();
  net.consumers[2].carbon_cost = 12.0;
  const CarbonFlowSolution s = clear_carbon_flow(net);
  std::ostringstream os;
  write_trace_csv(s, net, os);
  const std::string text = os.str();
  CHECK(text.find("iteration,objective,lambda_delta,residual") == 0);
  std::size_t rows = 0;
  for (char c : text) rows += c == '\n' ? 1 : 0;
  CHECK(rows == s.trace.size() + 1);
}

TEST_SUITE_END();

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace carbonclear {

// Absolute feasibility tolerance shared by solvers, solution checks and the
// allocation routines (MW on power balances, tons on emission balances).
inline constexpr double kFeasTol = 1e-6;

struct Bus {
  std::string id;
  bool is_reference = false;
};

struct Line {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  double susceptance = 0.0;  // MW per radian of angle difference
  double flow_limit = 0.0;   // MW, same limit in both directions
};

struct Generator {
  std::string id;
  std::string bus;
  double cost = 0.0;                // $/MWh
  double p_min = 0.0;               // MW
  double p_max = 0.0;               // MW
  double emission_intensity = 0.0;  // tons CO2 per MWh
};

struct Consumer {
  std::string id;
  std::string bus;
  double utility = 0.0;      // $/MWh bid
  double p_min = 0.0;        // MW
  double p_max = 0.0;        // MW
  double carbon_cost = 0.0;  // $/ton CO2
};

/// Immutable after construction; solvers never mutate a Network.
struct Network {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Generator> generators;
  std::vector<Consumer> consumers;

  /// Index of a bus id, -1 if unknown.
  int bus_index(const std::string& id) const;
  /// Index of the unique reference bus, -1 if absent or ambiguous.
  int reference_index() const;
};

struct Violation {
  std::string code;    // machine readable, e.g. "multiple-reference"
  std::string detail;  // human readable
};

/// Checks every structural invariant and returns the violations found.
/// Violations are data, not errors; an empty list means the network is valid.
std::vector<Violation> validate_network(const Network& net);

struct ObjectiveTerms {
  double utility = 0.0;          // u_d . p_d
  double carbon = 0.0;           // carbon_cost . e_d
  double generation_cost = 0.0;  // cost . p_g

  double welfare() const { return utility - carbon - generation_cost; }
};

struct DispatchSolution {
  std::vector<double> p_g;         // MW per generator
  std::vector<double> p_d;         // MW per consumer
  std::vector<double> theta;       // radians per bus
  std::vector<double> line_flows;  // MW per line, positive from->to
  // Generator-to-consumer allocation in MW, one row per generator. Empty
  // for models that do not allocate (fixed and flexible benchmarks).
  std::vector<std::vector<double>> allocation;
  std::vector<double> e_d;  // tons per consumer; empty when not allocated
  ObjectiveTerms objective_terms;
  // Reported uniformly as utility - carbon - generation cost, so solutions
  // from different models are comparable.
  double objective = 0.0;
  // True when every carbon cost is zero: the allocation then does not
  // affect the optimum and the reported matrix is a canonicalized choice.
  bool allocation_degenerate = false;

  bool has_allocation() const { return !allocation.empty(); }
};

struct CarbonFlowTracePoint {
  int iteration = 0;
  double objective = 0.0;     // self-consistent objective of the iterate
  double lambda_delta = 0.0;  // max |lambda - previous lambda|
  double residual = 0.0;      // max nodal carbon balance violation, tons
  std::vector<double> lambda;
};

struct CarbonFlowSolution {
  DispatchSolution dispatch;     // allocation empty; e_d = lambda * p_d
  std::vector<double> lambda_e;  // tons/MWh per bus
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;
  // Buses with no local generation and no incoming flow in the final
  // dispatch; their lambda is zero by convention.
  std::vector<int> zero_throughflow_buses;
  std::vector<CarbonFlowTracePoint> trace;
};

/// Verifies every DispatchSolution invariant against `net` at kFeasTol.
/// When `expect_allocation` is false the allocation-matrix checks are
/// skipped (benchmark models do not allocate).
std::vector<Violation> check_solution(const Network& net,
                                      const DispatchSolution& sol,
                                      bool expect_allocation);

struct LineParams {
  double susceptance = 1.0;
  double flow_limit = 1e4;
};

/// The built-in three-bus study case. Lines 1-2, 1-3, 2-3 default to
/// susceptance 1.0 and an effectively unconstrained 1e4 MW limit; pass
/// `line_params` to override (e.g. to create congestion).
Network builtin_three_bus(
    const std::optional<std::array<LineParams, 3>>& line_params = {});

}  // namespace carbonclear

#pragma once

#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace carbonclear::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { Minimize, Maximize };
enum class Relation { LessEqual, Equal, GreaterEqual };
enum class Status { Optimal, Infeasible, Unbounded };

struct Constraint {
  std::vector<std::pair<int, double>> coeffs;  // (variable index, coefficient)
  Relation relation = Relation::LessEqual;
  double rhs = 0.0;
  std::string name;
};

/// A linear program over bounded variables. Bounds may be +/-infinity.
struct LinearProgram {
  Sense sense = Sense::Minimize;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> objective;
  std::vector<std::string> var_names;  // used by the debug dump only
  std::vector<Constraint> constraints;

  int add_variable(double lo, double hi, double obj, std::string name = {});
  int add_constraint(Constraint c);
  std::size_t num_vars() const { return lower.size(); }
};

struct Solution {
  Status status = Status::Infeasible;
  std::vector<double> values;  // per variable, original units
  double objective = 0.0;      // in the requested sense
  // Per-constraint duals, defined as d(objective)/d(rhs) in the requested
  // sense. Populated when status == Optimal.
  std::vector<double> duals;
  // Constraint names implicated by the phase-1 certificate when Infeasible.
  std::vector<std::string> infeasible_rows;
  int iterations = 0;
};

struct SolverOptions {
  int max_iterations = 200000;
  int refactor_interval = 64;
  // Consecutive non-improving pivots before switching to Bland's rule.
  int stall_pivots = 300;
  double feas_tol = 1e-9;
  double opt_tol = 1e-9;
};

/// Solves `lp` with a bounded-variable revised simplex method.
/// Deterministic: identical inputs produce identical outputs.
/// Throws InputError on structural defects and IterationLimitError when the
/// pivot cap is exceeded.
Solution solve_lp(const LinearProgram& lp, const SolverOptions& opts = {});

/// Writes `lp` in the plain-text format documented in docs/formats.md.
void write_lp_file(const LinearProgram& lp, std::ostream& os);

}  // namespace carbonclear::lp

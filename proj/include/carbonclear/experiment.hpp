#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "carbonclear/carbonflow.hpp"
#include "carbonclear/metrics.hpp"
#include "carbonclear/model.hpp"
#include "carbonclear/scenario.hpp"

namespace carbonclear {

inline constexpr int kResultSchemaVersion = 1;

enum class ExperimentModel { CarbonCost, FixedDemand, FlexibleDemand,
                             CarbonFlow };

std::string to_string(ExperimentModel m);
ExperimentModel parse_model(const std::string& name);

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  // "optimal" | "non-converged" | "infeasible" | "error"
  std::string status;
  bool usable = false;  // metrics populated
  MetricsReport metrics;
  std::string message;
  double wall_ms = 0.0;  // reported in the timings sidecar only
};

struct AggregateStat {
  double mean = 0.0, min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

struct CaseResult {
  std::string label;  // e.g. "range[30,60]" or "fraction[40]"
  std::string model;
  std::vector<TrialRecord> trials;
  // Keyed by metric name; computed over usable trials, absent when none.
  std::map<std::string, AggregateStat> aggregates;
};

struct ExperimentConfig {
  Scenario scenario;
  std::vector<std::pair<double, double>> ranges;  // sweep-costs cases
  std::vector<double> fractions;                  // sweep-fraction cases
  std::pair<double, double> fraction_range{30.0, 60.0};
  std::vector<ExperimentModel> models;
  std::uint64_t master_seed = 0;
  int trials = 5;
  int workers = 1;
  CarbonFlowConfig flow;
};

/// Recomputes a TrialRecord's aggregate inputs; exposed for tests.
std::map<std::string, AggregateStat> aggregate_cases(
    const std::vector<TrialRecord>& trials);

/// Clears one scenario with one model; failures are captured in the record,
/// never thrown.
TrialRecord run_trial(const Network& net, ExperimentModel model,
                      const std::vector<double>& carbon_costs,
                      const CarbonFlowConfig& flow, int trial,
                      std::uint64_t seed);

/// Carbon-cost sweep: for each range x model, `trials` runs with seeds
/// derived from the master seed by trial index only, so every range and
/// model sees the same underlying draws.
std::vector<CaseResult> run_sweep_costs(const ExperimentConfig& cfg);

/// Carbon-sensitive-fraction sweep: seeds derived from (fraction percent,
/// trial index); adding fractions never perturbs existing trials.
std::vector<CaseResult> run_sweep_fraction(const ExperimentConfig& cfg);

/// Writes manifest.json, trials.csv, aggregates.csv and the timings.csv
/// sidecar into `dir`. Everything except timings.csv is byte-deterministic
/// for a fixed config and master seed.
void write_experiment_outputs(const std::string& dir,
                              const std::string& command,
                              const ExperimentConfig& cfg,
                              const std::vector<CaseResult>& results);

/// Renders plot-data CSVs from an experiment directory into `out_dir`:
/// a per-case summary table plus, per experiment kind, model-comparison or
/// box-plot files (schemas in docs/formats.md). Idempotent.
void render_report(const std::string& experiment_dir,
                   const std::string& out_dir, const std::string& format);

/// Writes a solved dispatch (and carbon-flow diagnostics when present) as
/// JSON, plus metrics, into `dir`. Used by the solve command.
void write_solution_outputs(const std::string& dir, const Network& net,
                            ExperimentModel model,
                            const DispatchSolution& dispatch,
                            const CarbonFlowSolution* flow,
                            const std::string& format);

}  // namespace carbonclear

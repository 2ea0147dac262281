#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "carbonclear/model.hpp"

namespace carbonclear {

struct ConsumerOutcome {
  std::string id;
  double p_d = 0.0;              // MWh over the cleared interval
  std::optional<double> e_d;     // tons; empty when the model did not
                                 // allocate emissions to consumers
};

struct MetricsReport {
  double total_generation = 0.0;       // MWh
  double total_generation_cost = 0.0;  // $
  double total_carbon = 0.0;           // tons, generation side
  double average_carbon = 0.0;         // tons/MWh
  bool degenerate = false;             // zero total generation
  std::vector<ConsumerOutcome> per_consumer;
  ObjectiveTerms objective_terms;
  double objective = 0.0;
};

MetricsReport compute_metrics(const Network& net, const DispatchSolution& sol);
MetricsReport compute_metrics(const Network& net,
                              const CarbonFlowSolution& sol);

struct ComparisonTable {
  std::vector<std::string> metric_names;
  std::vector<std::string> labels;
  std::size_t baseline = 0;
  // values[metric][report]; deltas in percent vs the baseline column,
  // absent where the baseline value is zero. Full precision here; renderers
  // round at output time only.
  std::vector<std::vector<double>> values;
  std::vector<std::vector<std::optional<double>>> percent_deltas;
};

/// Side-by-side table of at least two reports with percent deltas against
/// the report designated as baseline.
ComparisonTable compare(const std::vector<MetricsReport>& reports,
                        const std::vector<std::string>& labels,
                        std::size_t baseline = 0);

void write_metrics_csv(const MetricsReport& report, std::ostream& os);
void write_comparison_csv(const ComparisonTable& table, std::ostream& os);
void write_comparison_text(const ComparisonTable& table, std::ostream& os);

}  // namespace carbonclear

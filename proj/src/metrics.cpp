#include "carbonclear/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "carbonclear/errors.hpp"
#include "carbonclear/format.hpp"

namespace carbonclear {

std::string fmt_number(double v) {
  if (v == 0.0) return "0";  // avoid "-0"
  return nlohmann::json(v).dump();
}

MetricsReport compute_metrics(const Network& net,
                              const DispatchSolution& sol) {
  if (sol.p_g.size() != net.generators.size() ||
      sol.p_d.size() != net.consumers.size()) {
    throw InputError("compute_metrics: solution does not match network");
  }
  MetricsReport r;
  for (std::size_t m = 0; m < net.generators.size(); ++m) {
    r.total_generation += sol.p_g[m];
    r.total_generation_cost += net.generators[m].cost * sol.p_g[m];
    r.total_carbon += net.generators[m].emission_intensity * sol.p_g[m];
  }
  if (r.total_generation > kFeasTol) {
    r.average_carbon = r.total_carbon / r.total_generation;
  } else {
    r.average_carbon = 0.0;
    r.degenerate = true;
  }
  const bool allocated = sol.e_d.size() == net.consumers.size();
  for (std::size_t n = 0; n < net.consumers.size(); ++n) {
    ConsumerOutcome c;
    c.id = net.consumers[n].id;
    c.p_d = sol.p_d[n];
    if (allocated) c.e_d = sol.e_d[n];
    r.per_consumer.push_back(std::move(c));
  }
  r.objective_terms = sol.objective_terms;
  r.objective = sol.objective;
  return r;
}

MetricsReport compute_metrics(const Network& net,
                              const CarbonFlowSolution& sol) {
  return compute_metrics(net, sol.dispatch);
}

ComparisonTable compare(const std::vector<MetricsReport>& reports,
                        const std::vector<std::string>& labels,
                        std::size_t baseline) {
  if (reports.size() < 2) {
    throw InputError("compare: need at least two reports");
  }
  if (labels.size() != reports.size() || baseline >= reports.size()) {
    throw InputError("compare: labels/baseline do not match reports");
  }
  ComparisonTable t;
  t.metric_names = {"total_generation_mwh", "total_generation_cost_usd",
                    "total_carbon_tons",    "average_carbon_tons_per_mwh",
                    "utility_usd",          "carbon_cost_usd",
                    "objective_usd"};
  t.labels = labels;
  t.baseline = baseline;
  auto row_of = [](const MetricsReport& r) {
    return std::vector<double>{r.total_generation,
                               r.total_generation_cost,
                               r.total_carbon,
                               r.average_carbon,
                               r.objective_terms.utility,
                               r.objective_terms.carbon,
                               r.objective};
  };
  t.values.assign(t.metric_names.size(), {});
  t.percent_deltas.assign(t.metric_names.size(), {});
  const std::vector<double> base = row_of(reports[baseline]);
  for (const MetricsReport& r : reports) {
    const std::vector<double> row = row_of(r);
    for (std::size_t k = 0; k < t.metric_names.size(); ++k) {
      t.values[k].push_back(row[k]);
      if (base[k] != 0.0) {
        t.percent_deltas[k].push_back(100.0 * (row[k] - base[k]) /
                                      std::abs(base[k]));
      } else {
        t.percent_deltas[k].push_back(std::nullopt);
      }
    }
  }
  return t;
}

void write_metrics_csv(const MetricsReport& report, std::ostream& os) {
  os << "metric,value\n";
  os << "total_generation_mwh," << fmt_number(report.total_generation) << "\n";
  os << "total_generation_cost_usd,"
     << fmt_number(report.total_generation_cost) << "\n";
  os << "total_carbon_tons," << fmt_number(report.total_carbon) << "\n";
  os << "average_carbon_tons_per_mwh," << fmt_number(report.average_carbon)
     << "\n";
  os << "utility_usd," << fmt_number(report.objective_terms.utility) << "\n";
  os << "carbon_cost_usd," << fmt_number(report.objective_terms.carbon)
     << "\n";
  os << "objective_usd," << fmt_number(report.objective) << "\n";
  os << "degenerate," << (report.degenerate ? 1 : 0) << "\n";
  os << "\nconsumer,p_d_mwh,e_d_tons\n";
  for (const ConsumerOutcome& c : report.per_consumer) {
    os << c.id << "," << fmt_number(c.p_d) << ",";
    if (c.e_d) {
      os << fmt_number(*c.e_d);
    } else {
      os << "not-allocated";
    }
    os << "\n";
  }
}

void write_comparison_csv(const ComparisonTable& t, std::ostream& os) {
  os << "metric";
  for (const std::string& l : t.labels) {
    os << "," << l << "," << l << "_delta_pct";
  }
  os << "\n";
  for (std::size_t k = 0; k < t.metric_names.size(); ++k) {
    os << t.metric_names[k];
    for (std::size_t r = 0; r < t.labels.size(); ++r) {
      os << "," << fmt_number(t.values[k][r]) << ",";
      if (t.percent_deltas[k][r]) {
        os << fmt_number(*t.percent_deltas[k][r]);
      }
    }
    os << "\n";
  }
}

void write_comparison_text(const ComparisonTable& t, std::ostream& os) {
  os << std::left << std::setw(30) << "metric";
  for (const std::string& l : t.labels) {
    os << std::right << std::setw(16) << l << std::setw(10) << "delta%";
  }
  os << "\n";
  for (std::size_t k = 0; k < t.metric_names.size(); ++k) {
    os << std::left << std::setw(30) << t.metric_names[k];
    for (std::size_t r = 0; r < t.labels.size(); ++r) {
      std::ostringstream val;
      val << std::fixed << std::setprecision(2) << t.values[k][r];
      os << std::right << std::setw(16) << val.str();
      std::ostringstream delta;
      if (t.percent_deltas[k][r]) {
        delta << std::fixed << std::setprecision(2) << *t.percent_deltas[k][r];
      } else {
        delta << "-";
      }
      os << std::setw(10) << delta.str();
    }
    os << "\n";
  }
}

}  // namespace carbonclear

#include "carbonclear/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "carbonclear/clearing.hpp"
#include "carbonclear/errors.hpp"
#include "carbonclear/format.hpp"
#include "carbonclear/rng.hpp"

namespace carbonclear {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Seed-derivation tags; documented in docs/formats.md.
constexpr std::uint64_t kUtilityTag = 0;
constexpr std::uint64_t kCostSweepTag = 1;
constexpr std::uint64_t kFractionSweepTag = 2;

const std::vector<std::string> kMetricNames = {
    "total_generation_mwh", "total_generation_cost_usd",
    "total_carbon_tons",    "average_carbon_tons_per_mwh",
    "utility_usd",          "carbon_cost_usd",
    "objective_usd"};

std::vector<double> metric_row(const MetricsReport& r) {
  return {r.total_generation,
          r.total_generation_cost,
          r.total_carbon,
          r.average_carbon,
          r.objective_terms.utility,
          r.objective_terms.carbon,
          r.objective};
}

double quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string range_label(const std::pair<double, double>& r) {
  std::ostringstream os;
  os << "range[" << fmt_number(r.first) << "," << fmt_number(r.second) << "]";
  return os.str();
}

std::string fraction_label(double f) {
  return "fraction[" + fmt_number(f) + "]";
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

json config_json(const ExperimentConfig& cfg) {
  json ranges = json::array();
  for (const auto& r : cfg.ranges) ranges.push_back({r.first, r.second});
  json models = json::array();
  for (const auto m : cfg.models) models.push_back(to_string(m));
  return json{{"network_source", cfg.scenario.spec.network_source},
              {"demand_flex_floor", cfg.scenario.spec.demand_flex_floor},
              {"ranges", ranges},
              {"fractions", cfg.fractions},
              {"fraction_range",
               {cfg.fraction_range.first, cfg.fraction_range.second}},
              {"models", models},
              {"master_seed", cfg.master_seed},
              {"trials", cfg.trials}};
}

struct Task {
  std::size_t case_index;
  std::size_t trial_index;
};

// Runs one task per (case, trial) over a fixed-size pool. Results land in
// pre-sized slots, so output order is independent of scheduling.
template <typename Fn>
void run_pool(std::size_t task_count, int workers, Fn&& body) {
  const int n = std::max(1, workers);
  if (n == 1) {
    for (std::size_t t = 0; t < task_count; ++t) body(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(n);
  for (int w = 0; w < n; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const std::size_t t = next.fetch_add(1);
        if (t >= task_count) return;
        body(t);
      }
    });
  }
  for (auto& th : pool) th.join();
}

std::vector<CaseResult> run_cases(
    const ExperimentConfig& cfg,
    const std::vector<std::pair<std::string, std::vector<double>>>&
        case_costs) {
  std::vector<CaseResult> results;
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < case_costs.size(); ++c) {
    for (const auto model : cfg.models) {
      CaseResult cr;
      cr.label = case_costs[c].first;
      cr.model = to_string(model);
      cr.trials.resize(cfg.trials);
      results.push_back(std::move(cr));
    }
  }
  for (std::size_t r = 0; r < results.size(); ++r) {
    for (int t = 0; t < cfg.trials; ++t) {
      tasks.push_back({r, static_cast<std::size_t>(t)});
    }
  }

  // carbon cost vectors per (case, trial) are precomputed; the per-trial
  // seed identifies the draw and is shared by all models of a case.
  std::vector<std::vector<std::vector<double>>> costs(case_costs.size());
  std::vector<std::vector<std::uint64_t>> seeds(case_costs.size());

  const bool fraction_mode = !cfg.fractions.empty();
  for (std::size_t c = 0; c < case_costs.size(); ++c) {
    costs[c].resize(cfg.trials);
    seeds[c].resize(cfg.trials);
    for (int t = 0; t < cfg.trials; ++t) {
      std::uint64_t seed;
      double lo, hi, fraction;
      if (fraction_mode) {
        fraction = cfg.fractions[c];
        lo = cfg.fraction_range.first;
        hi = cfg.fraction_range.second;
        seed = derive_seed(cfg.master_seed,
                           {kFractionSweepTag,
                            static_cast<std::uint64_t>(std::llround(fraction)),
                            static_cast<std::uint64_t>(t)});
      } else {
        fraction = 100.0;
        lo = cfg.ranges[c].first;
        hi = cfg.ranges[c].second;
        seed = derive_seed(cfg.master_seed,
                           {kCostSweepTag, static_cast<std::uint64_t>(t)});
      }
      seeds[c][t] = seed;
      costs[c][t] = generate_carbon_costs(cfg.scenario.network.consumers.size(),
                                          lo, hi, fraction, seed);
    }
  }

  const std::size_t models_n = cfg.models.size();
  run_pool(tasks.size(), cfg.workers, [&](std::size_t i) {
    const Task& task = tasks[i];
    const std::size_t case_i = task.case_index / models_n;
    const ExperimentModel model = cfg.models[task.case_index % models_n];
    results[task.case_index].trials[task.trial_index] = run_trial(
        cfg.scenario.network, model, costs[case_i][task.trial_index],
        cfg.flow, static_cast<int>(task.trial_index),
        seeds[case_i][task.trial_index]);
  });

  for (CaseResult& cr : results) {
    cr.aggregates = aggregate_cases(cr.trials);
  }
  return results;
}

}  // namespace

std::string to_string(ExperimentModel m) {
  switch (m) {
    case ExperimentModel::CarbonCost:
      return "carbon-cost";
    case ExperimentModel::FixedDemand:
      return "fixed";
    case ExperimentModel::FlexibleDemand:
      return "flexible";
    case ExperimentModel::CarbonFlow:
      return "carbon-flow";
  }
  return "?";
}

ExperimentModel parse_model(const std::string& name) {
  if (name == "carbon-cost") return ExperimentModel::CarbonCost;
  if (name == "fixed") return ExperimentModel::FixedDemand;
  if (name == "flexible") return ExperimentModel::FlexibleDemand;
  if (name == "carbon-flow") return ExperimentModel::CarbonFlow;
  throw InputError("unknown model '" + name +
                   "'; expected carbon-cost, fixed, flexible or carbon-flow");
}

std::map<std::string, AggregateStat> aggregate_cases(
    const std::vector<TrialRecord>& trials) {
  std::map<std::string, AggregateStat> out;
  std::vector<std::vector<double>> columns(kMetricNames.size());
  for (const TrialRecord& t : trials) {
    if (!t.usable) continue;
    const auto row = metric_row(t.metrics);
    for (std::size_t k = 0; k < row.size(); ++k) columns[k].push_back(row[k]);
  }
  for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
    if (columns[k].empty()) continue;
    std::sort(columns[k].begin(), columns[k].end());
    AggregateStat s;
    s.min = columns[k].front();
    s.max = columns[k].back();
    s.q1 = quantile(columns[k], 0.25);
    s.median = quantile(columns[k], 0.5);
    s.q3 = quantile(columns[k], 0.75);
    double sum = 0.0;
    for (double v : columns[k]) sum += v;
    s.mean = sum / static_cast<double>(columns[k].size());
    out[kMetricNames[k]] = s;
  }
  return out;
}

TrialRecord run_trial(const Network& net, ExperimentModel model,
                      const std::vector<double>& carbon_costs,
                      const CarbonFlowConfig& flow, int trial,
                      std::uint64_t seed) {
  TrialRecord rec;
  rec.trial = trial;
  rec.seed = seed;
  Network scenario_net = net;
  if (carbon_costs.size() == scenario_net.consumers.size()) {
    for (std::size_t n = 0; n < carbon_costs.size(); ++n) {
      scenario_net.consumers[n].carbon_cost = carbon_costs[n];
    }
  }
  const auto start = std::chrono::steady_clock::now();
  try {
    switch (model) {
      case ExperimentModel::CarbonCost:
        rec.metrics =
            compute_metrics(scenario_net, clear_carbon_cost(scenario_net));
        rec.status = "optimal";
        break;
      case ExperimentModel::FixedDemand:
        rec.metrics =
            compute_metrics(scenario_net, clear_fixed_demand(scenario_net));
        rec.status = "optimal";
        break;
      case ExperimentModel::FlexibleDemand:
        rec.metrics = compute_metrics(scenario_net,
                                      clear_flexible_demand(scenario_net));
        rec.status = "optimal";
        break;
      case ExperimentModel::CarbonFlow: {
        const CarbonFlowSolution s = clear_carbon_flow(scenario_net, flow);
        rec.metrics = compute_metrics(scenario_net, s);
        rec.status = s.converged ? "optimal" : "non-converged";
        break;
      }
    }
    rec.usable = true;
  } catch (const InfeasibleError& e) {
    rec.status = "infeasible";
    rec.message = e.what();
  } catch (const std::exception& e) {
    rec.status = "error";
    rec.message = e.what();
  }
  const auto stop = std::chrono::steady_clock::now();
  rec.wall_ms =
      std::chrono::duration<double, std::milli>(stop - start).count();
  return rec;
}

std::vector<CaseResult> run_sweep_costs(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::vector<double>>> cases;
  for (const auto& r : cfg.ranges) {
    if (r.first < 0.0 || r.second < r.first) {
      throw InputError("sweep-costs: invalid range [" +
                       fmt_number(r.first) + "," + fmt_number(r.second) + "]");
    }
    cases.emplace_back(range_label(r), std::vector<double>{});
  }
  ExperimentConfig c = cfg;
  c.fractions.clear();
  return run_cases(c, cases);
}

std::vector<CaseResult> run_sweep_fraction(const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::vector<double>>> cases;
  for (double f : cfg.fractions) {
    if (f < 0.0 || f > 100.0) {
      throw InputError("sweep-fraction: fraction " + fmt_number(f) +
                       " outside [0, 100]");
    }
    cases.emplace_back(fraction_label(f), std::vector<double>{});
  }
  if (cases.empty()) {
    throw InputError("sweep-fraction: no fractions given");
  }
  return run_cases(cfg, cases);
}

void write_experiment_outputs(const std::string& dir,
                              const std::string& command,
                              const ExperimentConfig& cfg,
                              const std::vector<CaseResult>& results) {
  fs::create_directories(dir);

  {
    std::ofstream trials(fs::path(dir) / "trials.csv");
    trials << "case,model,trial,seed,status";
    for (const auto& m : kMetricNames) trials << "," << m;
    trials << "\n";
    for (const CaseResult& cr : results) {
      for (const TrialRecord& t : cr.trials) {
        trials << cr.label << "," << cr.model << "," << t.trial << ","
               << t.seed << "," << t.status;
        if (t.usable) {
          for (double v : metric_row(t.metrics)) {
            trials << "," << fmt_number(v);
          }
        } else {
          for (std::size_t k = 0; k < kMetricNames.size(); ++k) trials << ",";
        }
        trials << "\n";
      }
    }
  }
  {
    std::ofstream agg(fs::path(dir) / "aggregates.csv");
    agg << "case,model,metric,mean,min,q1,median,q3,max\n";
    for (const CaseResult& cr : results) {
      for (const auto& [metric, s] : cr.aggregates) {
        agg << cr.label << "," << cr.model << "," << metric << ","
            << fmt_number(s.mean) << "," << fmt_number(s.min) << ","
            << fmt_number(s.q1) << "," << fmt_number(s.median) << ","
            << fmt_number(s.q3) << "," << fmt_number(s.max) << "\n";
      }
    }
  }
  {
    // Wall-clock sidecar; the only file excluded from byte-determinism.
    std::ofstream timing(fs::path(dir) / "timings.csv");
    timing << "case,model,trial,wall_ms\n";
    for (const CaseResult& cr : results) {
      for (const TrialRecord& t : cr.trials) {
        timing << cr.label << "," << cr.model << "," << t.trial << ","
               << t.wall_ms << "\n";
      }
    }
  }

  json manifest;
  manifest["version"] = kResultSchemaVersion;
  manifest["command"] = command;
  manifest["config"] = config_json(cfg);
  manifest["config_hash"] = fnv1a(config_json(cfg).dump());
  manifest["files"] = {"trials.csv", "aggregates.csv"};
  manifest["sidecars"] = {"timings.csv"};
  json cases = json::array();
  for (const CaseResult& cr : results) {
    json status_counts;
    for (const TrialRecord& t : cr.trials) {
      status_counts[t.status] =
          status_counts.value(t.status, 0) + 1;
    }
    cases.push_back({{"case", cr.label},
                     {"model", cr.model},
                     {"trials", static_cast<int>(cr.trials.size())},
                     {"status_counts", status_counts}});
  }
  manifest["cases"] = cases;
  std::ofstream mf(fs::path(dir) / "manifest.json");
  mf << manifest.dump(2) << "\n";

  // Per-trial failure details, when any.
  bool any_message = false;
  for (const CaseResult& cr : results) {
    for (const TrialRecord& t : cr.trials) {
      if (!t.message.empty()) any_message = true;
    }
  }
  if (any_message) {
    std::ofstream log(fs::path(dir) / "failures.csv");
    log << "case,model,trial,status,message\n";
    for (const CaseResult& cr : results) {
      for (const TrialRecord& t : cr.trials) {
        if (t.message.empty()) continue;
        std::string msg = t.message;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        log << cr.label << "," << cr.model << "," << t.trial << ","
            << t.status << "," << msg << "\n";
      }
    }
  }
}

namespace {

struct LoadedExperiment {
  json manifest;
  // columns: case, model, trial, seed, status, metrics...
  std::vector<std::vector<std::string>> trial_rows;
  std::vector<std::vector<std::string>> aggregate_rows;
};

std::vector<std::vector<std::string>> read_rows(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw InputError(p.string() + ": cannot open");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    rows.push_back(std::move(fields));
  }
  return rows;
}

LoadedExperiment load_experiment(const std::string& dir) {
  LoadedExperiment e;
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw InputError(dir + ": missing manifest.json");
  e.manifest = json::parse(mf);
  const int version = e.manifest.value("version", -1);
  if (version != kResultSchemaVersion) {
    throw InputError("result schema version mismatch: found " +
                     std::to_string(version) + ", this build reads " +
                     std::to_string(kResultSchemaVersion));
  }
  e.trial_rows = read_rows(fs::path(dir) / "trials.csv");
  e.aggregate_rows = read_rows(fs::path(dir) / "aggregates.csv");
  return e;
}

}  // namespace

void render_report(const std::string& experiment_dir,
                   const std::string& out_dir, const std::string& format) {
  if (format != "csv" && format != "json") {
    throw InputError("report format must be csv or json");
  }
  const LoadedExperiment e = load_experiment(experiment_dir);
  fs::create_directories(out_dir);
  const std::string command = e.manifest.value("command", "");

  // Case summary: one row per case x model with mean metrics, the shape of
  // the headline comparison table.
  {
    std::vector<std::string> case_order;
    std::map<std::string, std::map<std::string, double>> means;
    for (const auto& row : e.aggregate_rows) {
      if (row.size() < 9) continue;
      const std::string key = row[0] + "," + row[1];
      if (!means.count(key)) case_order.push_back(key);
      means[key][row[2]] = std::stod(row[3]);
    }
    if (format == "csv") {
      std::ofstream out(fs::path(out_dir) / "summary_table.csv");
      out << "case,model";
      for (const auto& m : kMetricNames) out << "," << m;
      out << "\n";
      for (const auto& key : case_order) {
        out << key;
        for (const auto& m : kMetricNames) {
          out << ",";
          const auto it = means[key].find(m);
          if (it != means[key].end()) out << fmt_number(it->second);
        }
        out << "\n";
      }
    } else {
      json rows = json::array();
      for (const auto& key : case_order) {
        json row;
        const auto comma = key.find(',');
        row["case"] = key.substr(0, comma);
        row["model"] = key.substr(comma + 1);
        for (const auto& [metric, v] : means[key]) row[metric] = v;
        rows.push_back(row);
      }
      std::ofstream out(fs::path(out_dir) / "summary_table.json");
      out << json{{"version", kResultSchemaVersion}, {"rows", rows}}.dump(2)
          << "\n";
    }
  }

  // Box-plot data: per case x model x metric, aggregate stats plus the
  // individual points (one row per trial value).
  {
    std::ofstream out(fs::path(out_dir) / (command == "sweep-fraction"
                                               ? "boxplot_fraction.csv"
                                               : "boxplot_costs.csv"));
    out << "case,model,metric,mean,min,q1,median,q3,max\n";
    for (const auto& row : e.aggregate_rows) {
      if (row.size() < 9) continue;
      out << row[0] << "," << row[1] << "," << row[2];
      for (std::size_t k = 3; k < 9; ++k) out << "," << row[k];
      out << "\n";
    }
    std::ofstream pts(fs::path(out_dir) / "points.csv");
    pts << "case,model,trial,metric,value\n";
    for (const auto& row : e.trial_rows) {
      if (row.size() < 5 + kMetricNames.size()) continue;
      for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
        const std::string& v = row[5 + k];
        if (v.empty()) continue;
        pts << row[0] << "," << row[1] << "," << row[2] << ","
            << kMetricNames[k] << "," << v << "\n";
      }
    }
  }

  // Model comparison: cases as rows, one column block per model (mean
  // values), the shape of the model-versus-model bar charts.
  {
    std::vector<std::string> models, case_labels;
    std::map<std::string, std::map<std::string, std::map<std::string, double>>>
        mean;  // case -> model -> metric -> value
    for (const auto& row : e.aggregate_rows) {
      if (row.size() < 9) continue;
      if (std::find(models.begin(), models.end(), row[1]) == models.end()) {
        models.push_back(row[1]);
      }
      if (std::find(case_labels.begin(), case_labels.end(), row[0]) ==
          case_labels.end()) {
        case_labels.push_back(row[0]);
      }
      mean[row[0]][row[1]][row[2]] = std::stod(row[3]);
    }
    std::ofstream out(fs::path(out_dir) / "model_comparison.csv");
    out << "case,metric";
    for (const auto& m : models) out << "," << m;
    out << "\n";
    for (const auto& c : case_labels) {
      for (const auto& metric : kMetricNames) {
        out << c << "," << metric;
        for (const auto& m : models) {
          out << ",";
          const auto mit = mean[c][m].find(metric);
          if (mit != mean[c][m].end()) out << fmt_number(mit->second);
        }
        out << "\n";
      }
    }
  }
}

void write_solution_outputs(const std::string& dir, const Network& net,
                            ExperimentModel model,
                            const DispatchSolution& dispatch,
                            const CarbonFlowSolution* flow,
                            const std::string& format) {
  fs::create_directories(dir);
  json doc;
  doc["version"] = kResultSchemaVersion;
  doc["model"] = to_string(model);
  json pg, pd, theta, flows;
  for (std::size_t m = 0; m < net.generators.size(); ++m) {
    pg[net.generators[m].id] = dispatch.p_g[m];
  }
  for (std::size_t n = 0; n < net.consumers.size(); ++n) {
    pd[net.consumers[n].id] = dispatch.p_d[n];
  }
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    theta[net.buses[i].id] = dispatch.theta[i];
  }
  for (std::size_t l = 0; l < net.lines.size(); ++l) {
    flows[net.lines[l].id] = dispatch.line_flows[l];
  }
  doc["p_g_mw"] = pg;
  doc["p_d_mw"] = pd;
  doc["theta_rad"] = theta;
  doc["line_flows_mw"] = flows;
  doc["objective_terms"] = {
      {"utility_usd", dispatch.objective_terms.utility},
      {"carbon_cost_usd", dispatch.objective_terms.carbon},
      {"generation_cost_usd", dispatch.objective_terms.generation_cost}};
  doc["objective_usd"] = dispatch.objective;
  if (dispatch.has_allocation()) {
    doc["allocation_mw"] = dispatch.allocation;
    doc["allocation_degenerate"] = dispatch.allocation_degenerate;
  }
  if (!dispatch.e_d.empty()) {
    json ed;
    for (std::size_t n = 0; n < net.consumers.size(); ++n) {
      ed[net.consumers[n].id] = dispatch.e_d[n];
    }
    doc["e_d_tons"] = ed;
  }
  if (flow) {
    json lam;
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
      lam[net.buses[i].id] = flow->lambda_e[i];
    }
    doc["carbon_flow"] = {{"lambda_e_tons_per_mwh", lam},
                          {"iterations", flow->iterations},
                          {"converged", flow->converged},
                          {"residual_tons", flow->residual}};
  }
  std::ofstream sol(fs::path(dir) / "solution.json");
  sol << doc.dump(2) << "\n";

  const MetricsReport metrics =
      flow ? compute_metrics(net, *flow) : compute_metrics(net, dispatch);
  if (format == "json") {
    json m;
    m["version"] = kResultSchemaVersion;
    m["total_generation_mwh"] = metrics.total_generation;
    m["total_generation_cost_usd"] = metrics.total_generation_cost;
    m["total_carbon_tons"] = metrics.total_carbon;
    m["average_carbon_tons_per_mwh"] = metrics.average_carbon;
    m["utility_usd"] = metrics.objective_terms.utility;
    m["carbon_cost_usd"] = metrics.objective_terms.carbon;
    m["objective_usd"] = metrics.objective;
    m["degenerate"] = metrics.degenerate;
    json per;
    for (const auto& c : metrics.per_consumer) {
      json jc{{"p_d_mwh", c.p_d}};
      if (c.e_d) {
        jc["e_d_tons"] = *c.e_d;
      }
      per[c.id] = jc;
    }
    m["per_consumer"] = per;
    std::ofstream out(fs::path(dir) / "metrics.json");
    out << m.dump(2) << "\n";
  } else {
    std::ofstream out(fs::path(dir) / "metrics.csv");
    write_metrics_csv(metrics, out);
  }
  if (flow) {
    std::ofstream trace(fs::path(dir) / "trace.csv");
    write_trace_csv(*flow, net, trace);
  }
}

}  // namespace carbonclear

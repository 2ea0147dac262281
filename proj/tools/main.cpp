#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "carbonclear/carbonflow.hpp"
#include "carbonclear/clearing.hpp"
#include "carbonclear/errors.hpp"
#include "carbonclear/experiment.hpp"
#include "carbonclear/rng.hpp"
#include "carbonclear/scenario.hpp"

namespace {

using namespace carbonclear;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNonConverged = 4;
constexpr int kExitInternal = 5;

constexpr std::uint64_t kUtilitySeedTag = 0;

int default_workers() {
  if (const char* env = std::getenv("CARBONCLEAR_WORKERS")) {
    try {
      return std::max(1, std::stoi(env));
    } catch (const std::exception&) {
      std::cerr << "warning: ignoring invalid CARBONCLEAR_WORKERS value '"
                << env << "'\n";
    }
  }
  return 1;
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw InputError("range '" + text + "' must look like LO:HI");
  }
  try {
    return {std::stod(text.substr(0, colon)),
            std::stod(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw InputError("range '" + text + "' must look like LO:HI");
  }
}

struct CommonNetworkArgs {
  std::string network;
  std::string scenario_file;
  std::string utilities;
  double flex_floor = 0.8;
  bool lenient = false;

  Scenario resolve(std::uint64_t master_seed) const {
    const UtilitySpec uspec =
        utilities.empty()
            ? UtilitySpec::uniform(34.0, 73.0,
                                   derive_seed(master_seed, {kUtilitySeedTag}))
            : UtilitySpec::parse(utilities);
    if (!scenario_file.empty()) {
      return load_scenario_file(scenario_file, !lenient);
    }
    if (network.empty()) {
      throw InputError("give either --network or --scenario");
    }
    return resolve_network_source(network, uspec, flex_floor, !lenient);
  }
};

void add_network_options(CLI::App* cmd, CommonNetworkArgs& args) {
  cmd->add_option("--network", args.network,
                  "builtin:3bus | rts-gmlc:<dir> | <scenario file>");
  cmd->add_option("--scenario", args.scenario_file,
                  "scenario file (overrides --network)");
  cmd->add_option("--utilities", args.utilities,
                  "const:V | uniform:LO:HI:SEED | file:PATH "
                  "(default uniform:34:73 seeded from --seed)");
  cmd->add_option("--flex-floor", args.flex_floor,
                  "demand floor as a fraction of nominal load")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_flag("--lenient", args.lenient,
                "warn instead of failing on unknown scenario fields");
}

int run_solve(const CommonNetworkArgs& net_args, const std::string& model_name,
              const std::string& out_dir, const std::string& format,
              const std::string& range_text, double fraction,
              std::uint64_t seed, const CarbonFlowConfig& flow_cfg) {
  const ExperimentModel model = parse_model(model_name);
  Scenario sc = net_args.resolve(seed);
  if (!range_text.empty()) {
    const auto [lo, hi] = parse_range(range_text);
    const std::vector<double> costs = generate_carbon_costs(
        sc.network.consumers.size(), lo, hi, fraction, seed);
    for (std::size_t n = 0; n < costs.size(); ++n) {
      sc.network.consumers[n].carbon_cost = costs[n];
    }
  }

  int code = kExitOk;
  switch (model) {
    case ExperimentModel::CarbonCost:
      write_solution_outputs(out_dir, sc.network, model,
                             clear_carbon_cost(sc.network), nullptr, format);
      break;
    case ExperimentModel::FixedDemand:
      write_solution_outputs(out_dir, sc.network, model,
                             clear_fixed_demand(sc.network), nullptr, format);
      break;
    case ExperimentModel::FlexibleDemand:
      write_solution_outputs(out_dir, sc.network, model,
                             clear_flexible_demand(sc.network), nullptr,
                             format);
      break;
    case ExperimentModel::CarbonFlow: {
      const CarbonFlowSolution s = clear_carbon_flow(sc.network, flow_cfg);
      write_solution_outputs(out_dir, sc.network, model, s.dispatch, &s,
                             format);
      if (!s.converged) {
        std::cerr << "carbon-flow did not converge in " << s.iterations
                  << " iterations (best iterate written)\n";
        code = kExitNonConverged;
      }
      break;
    }
  }
  std::cout << "wrote " << out_dir << "\n";
  return code;
}

std::vector<ExperimentModel> parse_models(
    const std::vector<std::string>& names) {
  std::vector<ExperimentModel> out;
  for (const auto& n : names) out.push_back(parse_model(n));
  if (out.empty()) out.push_back(ExperimentModel::CarbonCost);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "carbonclear: electricity market clearing with consumer carbon costs"};
  app.require_subcommand(1);

  // solve
  auto* solve = app.add_subcommand("solve", "clear one scenario");
  CommonNetworkArgs solve_net;
  add_network_options(solve, solve_net);
  std::string model = "carbon-cost";
  std::string out_dir = "out/solve";
  std::string format = "csv";
  std::string range_text;
  double fraction = 100.0;
  std::uint64_t seed = 1;
  CarbonFlowConfig flow_cfg;
  std::string flow_init = "flexible";
  solve->add_option("--model", model,
                    "carbon-cost | fixed | flexible | carbon-flow");
  solve->add_option("--out", out_dir, "output directory");
  solve->add_option("--format", format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}));
  solve->add_option("--carbon-range", range_text,
                    "LO:HI, draw carbon costs before solving");
  solve->add_option("--fraction", fraction,
                    "percent of carbon-sensitive consumers")
      ->check(CLI::Range(0.0, 100.0));
  solve->add_option("--seed", seed, "seed for carbon cost draws");
  solve->add_option("--flow-max-iters", flow_cfg.max_iterations,
                    "carbon-flow iteration cap");
  solve->add_option("--flow-tol", flow_cfg.lambda_tolerance,
                    "carbon-flow convergence tolerance");
  solve->add_option("--flow-init", flow_init, "zero | flexible");

  // sweep-costs
  auto* sweep_costs = app.add_subcommand(
      "sweep-costs", "trials over carbon-cost ranges, all consumers bidding");
  CommonNetworkArgs costs_net;
  add_network_options(sweep_costs, costs_net);
  std::vector<std::string> range_texts;
  std::vector<std::string> model_names{"carbon-cost"};
  std::string costs_out = "out/sweep-costs";
  std::uint64_t costs_seed = 1;
  int trials = 5;
  int workers = 0;
  sweep_costs->add_option("--ranges", range_texts,
                          "carbon cost ranges as LO:HI entries")
      ->delimiter(',');
  sweep_costs->add_option("--models", model_names, "models to run")
      ->delimiter(',');
  sweep_costs->add_option("--trials", trials, "trials per case")
      ->check(CLI::PositiveNumber);
  sweep_costs->add_option("--seed", costs_seed, "master seed");
  sweep_costs->add_option("--workers", workers,
                          "parallel trials (default $CARBONCLEAR_WORKERS)");
  sweep_costs->add_option("--out", costs_out, "output directory");

  // sweep-fraction
  auto* sweep_fraction = app.add_subcommand(
      "sweep-fraction",
      "trials over the share of carbon-sensitive consumers");
  CommonNetworkArgs fraction_net;
  add_network_options(sweep_fraction, fraction_net);
  std::vector<double> fractions;
  std::string fraction_range_text = "30:60";
  std::vector<std::string> fraction_models{"carbon-cost"};
  std::string fraction_out = "out/sweep-fraction";
  std::uint64_t fraction_seed = 1;
  int fraction_trials = 5;
  int fraction_workers = 0;
  sweep_fraction->add_option("--fractions", fractions,
                             "percent values, e.g. 10,20,...,100")
      ->delimiter(',');
  sweep_fraction->add_option("--range", fraction_range_text,
                             "carbon cost range LO:HI");
  sweep_fraction->add_option("--models", fraction_models, "models to run")
      ->delimiter(',');
  sweep_fraction->add_option("--trials", fraction_trials, "trials per case")
      ->check(CLI::PositiveNumber);
  sweep_fraction->add_option("--seed", fraction_seed, "master seed");
  sweep_fraction->add_option("--workers", fraction_workers,
                             "parallel trials (default $CARBONCLEAR_WORKERS)");
  sweep_fraction->add_option("--out", fraction_out, "output directory");

  // report
  auto* report = app.add_subcommand(
      "report", "render plot-data files from experiment results");
  std::string report_in, report_out = "out/report";
  std::string report_format = "csv";
  report->add_option("--in", report_in, "experiment directory")->required();
  report->add_option("--out", report_out, "output directory");
  report->add_option("--format", report_format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) {
      if (flow_init == "zero") {
        flow_cfg.initialization = LambdaInit::ZeroLambda;
      } else if (flow_init == "flexible") {
        flow_cfg.initialization = LambdaInit::FromFlexibleDispatch;
      } else {
        throw InputError("--flow-init must be zero or flexible");
      }
      return run_solve(solve_net, model, out_dir, format, range_text,
                       fraction, seed, flow_cfg);
    }
    if (sweep_costs->parsed()) {
      ExperimentConfig cfg;
      cfg.scenario = costs_net.resolve(costs_seed);
      for (const auto& t : range_texts) cfg.ranges.push_back(parse_range(t));
      cfg.models = parse_models(model_names);
      cfg.master_seed = costs_seed;
      cfg.trials = trials;
      cfg.workers = workers > 0 ? workers : default_workers();
      const auto results = run_sweep_costs(cfg);
      write_experiment_outputs(costs_out, "sweep-costs", cfg, results);
      std::cout << "wrote " << costs_out << "\n";
      return kExitOk;
    }
    if (sweep_fraction->parsed()) {
      ExperimentConfig cfg;
      cfg.scenario = fraction_net.resolve(fraction_seed);
      cfg.fractions = fractions;
      cfg.fraction_range = parse_range(fraction_range_text);
      cfg.models = parse_models(fraction_models);
      cfg.master_seed = fraction_seed;
      cfg.trials = fraction_trials;
      cfg.workers =
          fraction_workers > 0 ? fraction_workers : default_workers();
      const auto results = run_sweep_fraction(cfg);
      write_experiment_outputs(fraction_out, "sweep-fraction", cfg, results);
      std::cout << "wrote " << fraction_out << "\n";
      return kExitOk;
    }
    if (report->parsed()) {
      render_report(report_in, report_out, report_format);
      std::cout << "wrote " << report_out << "\n";
      return kExitOk;
    }
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const IterationLimitError& e) {
    std::cerr << "did not converge: " << e.what() << "\n";
    return kExitNonConverged;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "carbonclear/model.hpp"

namespace carbonclear {

inline constexpr int kScenarioSchemaVersion = 1;

/// Fuel type (case-insensitive) to tons CO2 per MWh.
struct EmissionIntensityTable {
  std::map<std::string, double> by_fuel;
  // Applied to fuels missing from the table; ingestion fails on unknown
  // fuels when unset.
  std::optional<double> default_intensity;

  double lookup(const std::string& fuel) const;  // throws on unknown fuel
};

/// Natural gas 0.6042, oil 0.7434, coal 0.9606; wind/solar/hydro, nuclear
/// and storage carry zero.
EmissionIntensityTable default_intensity_table();

struct UtilitySpec {
  enum class Kind { Constant, UniformRange, PerConsumerFile };
  Kind kind = Kind::Constant;
  double value = 0.0;           // Constant
  double lo = 0.0, hi = 0.0;    // UniformRange
  std::uint64_t seed = 0;       // UniformRange
  std::string path;             // PerConsumerFile: CSV of id,utility

  static UtilitySpec constant(double v);
  static UtilitySpec uniform(double lo, double hi, std::uint64_t seed);
  static UtilitySpec from_file(std::string path);
  /// Parses "const:55", "uniform:40:67:seed" or "file:path".
  static UtilitySpec parse(const std::string& text);
  std::string to_string() const;
};

struct ScenarioSpec {
  std::string network_source;  // "builtin:3bus" | "rts-gmlc:<dir>" | file path
  double carbon_cost_lo = 0.0;               // $/ton
  double carbon_cost_hi = 0.0;               // $/ton
  double carbon_sensitive_fraction = 100.0;  // percent of consumers
  double demand_flex_floor = 0.8;            // P_min as a fraction of P_max
  std::uint64_t seed = 0;
  int trials = 1;
};

/// Loads the bus/branch/gen CSV tables (layout documented in
/// docs/formats.md). Consumers are the buses with nonzero load; their
/// minimum demand is flex_floor times the nominal load. The bus with the
/// lowest numeric id becomes the reference.
Network load_rts_gmlc(const std::string& dir,
                      const EmissionIntensityTable& intensities,
                      double flex_floor, const UtilitySpec& utilities);

/// Draws carbon costs: a seeded uniformly-random subset of
/// round(fraction/100 * n) consumers receives i.i.d. uniform values from
/// [lo, hi]; everyone else gets zero. Pure function of (inputs, seed).
std::vector<double> generate_carbon_costs(std::size_t num_consumers,
                                          double lo, double hi,
                                          double fraction_percent,
                                          std::uint64_t seed);

/// Applies a utility assignment to consumers in index order.
std::vector<double> assign_utilities(const std::vector<Consumer>& consumers,
                                     const UtilitySpec& spec);

struct Scenario {
  Network network;
  ScenarioSpec spec;
};

/// Reads/writes the versioned scenario JSON schema (docs/formats.md).
/// Strict mode rejects unknown fields; lenient mode warns on stderr.
Scenario load_scenario_file(const std::string& path, bool strict = true);
void save_scenario_file(const Scenario& scenario, const std::string& path);

/// Resolves "builtin:3bus", "rts-gmlc:<dir>" or a scenario file path.
/// `utilities`/`flex_floor` apply to the rts-gmlc form.
Scenario resolve_network_source(const std::string& source,
                                const UtilitySpec& utilities,
                                double flex_floor, bool strict = true);

}  // namespace carbonclear

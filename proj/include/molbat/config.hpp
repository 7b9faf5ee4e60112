#pragma once

// Scenario configuration files (JSON, schema version 1). The full key
// reference is in the README. Unknown keys are rejected everywhere.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "molbat/errors.hpp"
#include "molbat/exciton.hpp"
#include "molbat/operators.hpp"
#include "molbat/rwc.hpp"
#include "molbat/spectrum.hpp"

namespace molbat {

/// Malformed or invalid configuration. The message names the key path (and
/// the line for JSON syntax errors).
class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

inline constexpr int kConfigVersion = 1;

enum class ScenarioKind { BatterySteady, BatteryEvolve, DischargeRate, Ergotropy, ExcitonFactory, RwcCompare };

std::string scenario_name(ScenarioKind k);

struct SweepSpec {
  std::string parameter;  // dotted key path, e.g. "battery.delta_mu"
  std::vector<double> values;
};

struct Tolerances {
  double stationary_trace_distance = 1e-6;
  double cptp = 1e-8;
  double rate_agreement = 1e-9;
  double bound_slack = 1e-10;
  double kms_ratio = 1e-6;
};

struct ChargingSettings {
  int sidebands = 3;
  double eta = 1e-3;
};

enum class BatteryInitial { Empty, Charged };

struct EvolveSettings {
  std::vector<double> times;
  BatteryInitial initial = BatteryInitial::Empty;
};

struct ExcitonSettings {
  ExcitonFactoryParams params;
  std::vector<double> delta_mu_grid;
  bool fit_exact_state = true;  // Fermi-Dirac fit of the exact stationary state (n <= 8)
};

enum class RwcInitial { Ground, Excited, Mixed, Superposition };

struct RwcSettings {
  ComplexMatrix hamiltonian;
  ComplexMatrix coupling;
  std::optional<BathCorrelation> correlation;
  double lambda = 1.0;
  std::vector<double> times;
  RwcInitial initial = RwcInitial::Excited;
  bool with_lamb = false;
};

/// Fully resolved parameters of one sweep point.
struct PointConfig {
  std::vector<std::pair<std::string, double>> swept;  // parameter values at this point
  BatteryParams battery;
  ChargingSettings charging;
  EvolveSettings evolve;
  std::optional<CouplingSpectrum> discharge_spectrum;
  std::optional<ExcitonSettings> exciton;
  std::optional<RwcSettings> rwc;
};

struct ScenarioConfig {
  int version = kConfigVersion;
  ScenarioKind kind = ScenarioKind::BatterySteady;
  std::string name;
  std::uint64_t seed = 0;
  Tolerances tolerances;
  std::string out_dir = "results";
  std::string format = "csv";
  std::vector<SweepSpec> sweeps;
  std::uint64_t hash = 0;     // FNV-1a of the canonical JSON text
  std::string base_dir;       // relative data files are resolved against this
  std::vector<PointConfig> points;  // cartesian product, first sweep slowest
};

/// Parses and validates every sweep point. Throws ConfigError.
ScenarioConfig parse_config(const std::string& text, const std::string& base_dir = ".",
                            const std::string& default_name = "run");
ScenarioConfig load_config(const std::string& path);

}  // namespace molbat

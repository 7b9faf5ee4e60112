#pragma once

// Scenario pipelines behind the simulate CLI. Each sweep point is a pure
// evaluation producing one ResultRecord.

#include <vector>

#include "molbat/config.hpp"
#include "molbat/records.hpp"

namespace molbat {

struct RunOptions {
  bool verify = false;  // run the invariant checks of the scenario as well
  int threads = 1;
};

/// Status strings start with one of these kinds.
inline constexpr const char* kStatusNumerical = "numerical-failure";
inline constexpr const char* kStatusInvariant = "invariant-violation";
inline constexpr const char* kStatusVerify = "verify-failed";
inline constexpr const char* kStatusError = "error";

/// Never throws for module-level failures; they mark the record instead.
ResultRecord run_point(const ScenarioConfig& cfg, std::size_t index, const RunOptions& opt);

/// All sweep points, on up to opt.threads workers, ordered by sweep index.
std::vector<ResultRecord> run_scenario(const ScenarioConfig& cfg, const RunOptions& opt);

}  // namespace molbat

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ehsched/ingest.hpp"

namespace ehs::cli {

// sysexits-style codes.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kStructureViolation = 2,
  kDominanceViolation = 3,
  kUsage = 64,
  kDataError = 65,
  kNoInput = 66,
  kCantCreate = 73,
};

struct SolveConfig {
  std::filesystem::path model;
  int horizon = 0;
  std::filesystem::path out = ".";
  bool strict = false;
};

/// Writes value_table.bin and structure_report.json into `out`.
int cmd_solve(const SolveConfig& config, std::ostream& log);

struct SimulateConfig {
  std::filesystem::path model;
  std::optional<std::filesystem::path> table;
  int horizon = 0;
  std::vector<int> sweep_horizons;
  int reps = 10000;
  std::uint64_t seed = 1;
  std::vector<std::string> policies;
  std::filesystem::path out = ".";
  int dump_trajectories = 0;
  unsigned threads = 1;
  double initial_energy = 0.0;
  /// `compare` requires at least two policies.
  bool require_multiple_policies = false;
};

/// Writes aggregate.csv, summary.json and optional trajectories_*.csv.
int cmd_simulate(const SimulateConfig& config, std::ostream& log);

struct IngestConfig {
  std::filesystem::path trace;
  std::filesystem::path out;
  TraceSpec spec;
  std::vector<double> levels_mw;  // empty: 802.11n defaults
  double bandwidth_hz = 40e6;
  double noise_psd_w_per_hz = 0.83e-9;
  double quantum_mj = 1.0;
  std::optional<double> max_mj;
};

/// Writes a model definition file built from an irradiance trace.
int cmd_ingest(const IngestConfig& config, std::ostream& log);

/// Parses argv and dispatches to a subcommand.
int run(int argc, const char* const* argv, std::ostream& log);

/// Seed for sweep cell `index` derived from the master seed.
std::uint64_t cell_seed(std::uint64_t master, std::size_t index);

}  // namespace ehs::cli

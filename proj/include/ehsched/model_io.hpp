#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "ehsched/model.hpp"

namespace ehs {

inline constexpr int kModelSchemaVersion = 1;

/// Malformed or inconsistent model definition document.
class ModelFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Model definition document:
//
//   {
//     "schema_version": 1,
//     "harvest":   {"states_mJ": [...], "transitions": [[...]], "slot_s": 1},
//     "channel":   {"gains": [...], "transitions": [[...]]},      (optional)
//     "power_set": {"levels_mW": [...], "idle": false},           (idle optional)
//     "grid":      {"quantum_mJ": 1, "max_mJ": 4096},              (optional)
//     "rate":      {"form": "shannon", "bandwidth_hz": 4e7,
//                   "noise_psd_w_per_hz": 8.3e-10}                 (optional)
//   }
//
// When "idle" is absent the defer action is enabled exactly when the channel
// is not the static single-state gain-1 channel.

Problem problem_from_json(const nlohmann::json& doc);
nlohmann::json problem_to_json(const Problem& problem);

/// Throws std::filesystem::filesystem_error style errors through
/// ModelFileError when the file is missing or unreadable.
Problem load_problem(const std::filesystem::path& path);
void save_problem(const Problem& problem, const std::filesystem::path& path);

/// Stable 64-bit FNV-1a digest of the canonical model document.
std::uint64_t problem_hash(const Problem& problem);

/// Reference setup: burst harvest model, static channel, 802.11n
/// levels, Shannon rate at 40 MHz / 0.83 nW/Hz, 1 mJ grid up to E_max.
Problem burst_problem(double max_mj = 4096.0);

}  // namespace ehs

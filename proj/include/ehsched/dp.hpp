#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "ehsched/model.hpp"

namespace ehs {

/// Decision code for the zero-power defer action. Nonnegative codes index
/// into PowerRateSet levels.
inline constexpr int kIdle = -1;

using DecisionMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

/// One slots-to-go layer. Rows are energy-grid indices, columns are joint
/// (harvest, channel) states, harvest-major: column = h * |channel| + u.
struct Layer {
  Matrix values;
  DecisionMatrix decisions;
};

/// Optimal values V_n*(e, h, gamma) and argmax decisions for n = 1..N.
class ValueTable {
 public:
  ValueTable(Problem problem, std::vector<Layer> layers,
             std::uint64_t clamped_cells = 0);

  int horizon() const { return static_cast<int>(layers_.size()); }
  const Problem& problem() const { return problem_; }
  std::size_t state_count() const { return problem_.harvest.size() * problem_.channel.size(); }
  std::size_t state_index(std::size_t h, std::size_t u) const {
    return h * problem_.channel.size() + u;
  }

  /// Layer for n slots to go, 1 <= n <= horizon().
  const Layer& layer(int n) const { return layers_.at(static_cast<std::size_t>(n - 1)); }
  double value(int n, std::size_t e_index, std::size_t h, std::size_t u) const {
    return layer(n).values(static_cast<Eigen::Index>(e_index),
                           static_cast<Eigen::Index>(state_index(h, u)));
  }
  int decision(int n, std::size_t e_index, std::size_t h, std::size_t u) const {
    return layer(n).decisions(static_cast<Eigen::Index>(e_index),
                              static_cast<Eigen::Index>(state_index(h, u)));
  }

  /// Cells (n, e, h, gamma) whose optimal action can push the next energy
  /// above the grid ceiling.
  std::uint64_t clamped_cells() const { return clamped_cells_; }

 private:
  Problem problem_;
  std::vector<Layer> layers_;
  std::uint64_t clamped_cells_;
};

/// Per-slot drain for a decision code.
inline double decision_drain(const PowerRateSet& set, int decision) {
  return decision == kIdle ? 0.0 : set.drain(static_cast<std::size_t>(decision));
}

/// V_1*: best single-slot bits at every grid energy for gain `gamma`.
/// Returns (values, decisions) as a one-column layer. Idle is a candidate
/// when the power set includes it.
Layer terminal_layer(const PowerRateSet& power_set, const EnergyGrid& grid, double gamma);

/// Backward induction over (energy, harvest, channel). Ties go to the lower
/// power level (idle lowest of all).
ValueTable backward_induct(const Problem& problem, int horizon);

/// V_n(e, h, gamma, action) for every admissible action at one cell, idle
/// first when allowed, then levels in increasing order.
std::vector<double> action_values(const ValueTable& table, int n,
                                  std::size_t e_index, std::size_t h,
                                  std::size_t u);

struct CellRef {
  int n;
  std::size_t harvest_state;
  std::size_t channel_state;
  double energy;
};

struct DecisionViolation {
  CellRef cell;
  int expected;
  int actual;
};

struct PairViolation {
  CellRef cell;
  int higher;
  int lower;
};

struct StructureReport {
  bool theorem1_checked = false;
  bool theorem1_ok = true;
  std::vector<DecisionViolation> theorem1_violations;

  /// Decisions nondecreasing in energy at every (n, h, gamma).
  bool threshold_ok = true;
  std::vector<DecisionViolation> threshold_violations;

  /// Preference for a higher level over a lower one never reverts as energy
  /// grows (one - to + sign switch at most).
  bool assumption1_ok = true;
  std::vector<PairViolation> assumption1_violations;

  /// Top-level region e > n*rho_max picks rho_max, and the low region
  /// e <= g(rho')/g(rho)*rho never strictly prefers rho over rho'.
  bool lemma_bounds_ok = true;
  std::vector<PairViolation> lemma_violations;

  std::uint64_t grid_cells = 0;

  bool all_ok() const {
    return theorem1_ok && threshold_ok && assumption1_ok && lemma_bounds_ok;
  }
};

/// Diagnostics only; never throws on violations.
StructureReport check_structure(const ValueTable& table);

nlohmann::json report_to_json(const StructureReport& report);

// Binary table dump: "EHSDPTBL", u32 version, u32 header length, JSON header
// (horizon, grid, state counts, embedded model, problem hash), then per layer
// little-endian f64 values and i32 decisions in column-major order.
inline constexpr std::uint32_t kTableFormatVersion = 1;

class TableFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_table(const ValueTable& table, const std::filesystem::path& path);
ValueTable load_table(const std::filesystem::path& path);

}  // namespace ehs

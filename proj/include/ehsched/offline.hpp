#pragma once

#include <span>
#include <vector>

#include "ehsched/model.hpp"

namespace ehs {

// Offline oracles assume the whole harvest (and gain) realization is known and
// allow any nonnegative real power. Slot sequences here are chronological:
// element 0 is the first slot of the horizon (slot N), and harvests[t] is the
// energy arriving after slot t, usable from slot t+1 on.

struct OfflineSolution {
  std::vector<double> drains;        // per-slot energy spent, mJ
  std::vector<double> water_levels;  // fading only
  std::vector<double> energies;      // stored energy at the start of each slot
  /// For each t, e_N + harvests before t minus energy spent through t.
  std::vector<double> causality_margin;
  double total_bits = 0.0;

  double min_margin() const;
};

/// Highest constant power the remaining horizon can sustain from slot n:
/// min(e, min over prefixes of (e + sum of the first t future harvests)/(t+1)).
/// Slots to go is 1 + future_harvests.size().
double offline_power_static(double energy, std::span<const double> future_harvests);

/// Stretched-string schedule on a static channel. Horizon is
/// harvests.size() + 1.
OfflineSolution solve_offline_static(const PowerRateSet& set, double initial_energy,
                                     std::span<const double> harvests);

/// Exact continuous-power water-filling for a known gain sequence
/// (gains.size() == harvests.size() + 1). Power in slot t is
/// (w_t - noise/gamma_t)_+ with water levels nondecreasing in t.
OfflineSolution solve_offline_fading(const PowerRateSet& set, double initial_energy,
                                     std::span<const double> harvests,
                                     std::span<const double> gains);

/// Inputs to the expected water level at slot n. Inverse gains are in energy
/// units: noise energy per slot divided by the gain.
struct WaterLevelInputs {
  double energy = 0.0;
  double inverse_gain = 0.0;                // current slot, known exactly
  std::vector<double> harvest_means;        // E[H_{n-1}], ..., E[H_1]
  std::vector<double> inverse_gain_means;   // E[c_{n-1}], ..., E[c_1]

  int slots_to_go() const { return static_cast<int>(harvest_means.size()) + 1; }
};

enum class WaterLevelMode {
  /// Average over the whole remaining horizon only, with the plus-part taken
  /// outside the expectation.
  kWholeHorizon,
  /// Minimum over every split point of the per-split fixed points.
  kMinOverSplits,
};

struct WaterLevelResult {
  double level = 0.0;
  double residual = 0.0;       // |w - RHS(w)|
  bool no_sign_change = false; // fixed point above the bracket [0, e + c_n]
};

/// Largest fixed point of
///   w = [e + c_n + sum_k (E[H_k] + E[c_k]) - sum_{k<=n} (E[c_k] - w)_+] / n
/// by bisection on [0, e + c_n].
WaterLevelResult expected_water_level(const WaterLevelInputs& in,
                                      WaterLevelMode mode = WaterLevelMode::kWholeHorizon);

/// RHS of the whole-horizon fixed point equation, exposed for residual checks.
double water_level_rhs(const WaterLevelInputs& in, double w);

struct InversionResult {
  double energy = 0.0;
  bool unreachable = false;  // required energy exceeded the ceiling
};

/// Minimal stored energy whose whole-horizon expected water level reaches
/// target + c_n. `in.energy` is ignored.
InversionResult invert_water_level(double target_drain, const WaterLevelInputs& in,
                                   double ceiling);

}  // namespace ehs

#include "ehsched/offline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ehs {

namespace {

void require_nonnegative(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (v < 0.0) throw DomainError(std::string(what) + " must be nonnegative");
  }
}

void fill_margins(OfflineSolution& s, double initial_energy, std::span<const double> harvests) {
  double available = initial_energy;
  double spent = 0.0;
  s.causality_margin.clear();
  for (std::size_t t = 0; t < s.drains.size(); ++t) {
    if (t > 0) available += harvests[t - 1];
    spent += s.drains[t];
    s.causality_margin.push_back(available - spent);
  }
}

/// Level w with sum_k (w - floors_k)_+ = budget.
double fill_level(std::span<const double> floors, double budget) {
  std::vector<double> sorted(floors.begin(), floors.end());
  std::sort(sorted.begin(), sorted.end());
  double acc = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    acc += sorted[k];
    const double w = (budget + acc) / static_cast<double>(k + 1);
    if (k + 1 == sorted.size() || w <= sorted[k + 1]) return w;
  }
  return sorted.front();
}

}  // namespace

double OfflineSolution::min_margin() const {
  if (causality_margin.empty()) return 0.0;
  return *std::min_element(causality_margin.begin(), causality_margin.end());
}

double offline_power_static(double energy, std::span<const double> future_harvests) {
  if (energy < 0.0) throw DomainError("stored energy must be nonnegative");
  require_nonnegative(future_harvests, "harvests");
  double best = energy;
  double acc = energy;
  for (std::size_t t = 0; t < future_harvests.size(); ++t) {
    acc += future_harvests[t];
    best = std::min(best, acc / static_cast<double>(t + 2));
  }
  return best;
}

OfflineSolution solve_offline_static(const PowerRateSet& set, double initial_energy,
                                     std::span<const double> harvests) {
  if (initial_energy < 0.0) throw DomainError("stored energy must be nonnegative");
  require_nonnegative(harvests, "harvests");
  const std::size_t horizon = harvests.size() + 1;
  OfflineSolution s;
  double e = initial_energy;
  for (std::size_t t = 0; t < horizon; ++t) {
    const double p = std::min(e, offline_power_static(e, harvests.subspan(t)));
    s.energies.push_back(e);
    s.drains.push_back(p);
    s.total_bits += set.full_slot_bits(p, 1.0);
    e = std::max(e - p, 0.0);
    if (t < harvests.size()) e += harvests[t];
  }
  fill_margins(s, initial_energy, harvests);
  return s;
}

OfflineSolution solve_offline_fading(const PowerRateSet& set, double initial_energy,
                                     std::span<const double> harvests,
                                     std::span<const double> gains) {
  if (initial_energy < 0.0) throw DomainError("stored energy must be nonnegative");
  require_nonnegative(harvests, "harvests");
  if (gains.size() != harvests.size() + 1) {
    throw std::invalid_argument("need one gain per slot");
  }
  const std::size_t horizon = gains.size();
  std::vector<double> floors(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    if (!(gains[t] > 0.0)) throw DomainError("channel gain must be positive");
    floors[t] = set.noise_energy() / gains[t];
  }

  OfflineSolution s;
  s.drains.assign(horizon, 0.0);
  s.water_levels.assign(horizon, 0.0);
  s.energies.assign(horizon, 0.0);

  // Each segment starts at `start` with stored energy `e`; the binding
  // segment is the prefix with the lowest water level.
  std::size_t start = 0;
  double e = initial_energy;
  while (start < horizon) {
    double budget = e;
    double best_level = std::numeric_limits<double>::infinity();
    std::size_t best_end = start;
    for (std::size_t end = start; end < horizon; ++end) {
      if (end > start) budget += harvests[end - 1];
      const double w = fill_level(std::span(floors).subspan(start, end - start + 1), budget);
      if (w <= best_level) {
        best_level = w;
        best_end = end;
      }
    }
    for (std::size_t t = start; t <= best_end; ++t) {
      s.energies[t] = e;
      s.water_levels[t] = best_level;
      const double p = std::min(std::max(best_level - floors[t], 0.0), e);
      s.drains[t] = p;
      s.total_bits += set.full_slot_bits(p, gains[t]);
      e = std::max(e - p, 0.0);
      if (t < harvests.size()) e += harvests[t];
    }
    start = best_end + 1;
  }
  fill_margins(s, initial_energy, harvests);
  return s;
}

namespace {

/// RHS over the first `slots` slots of the remaining horizon.
double split_rhs(const WaterLevelInputs& in, std::size_t slots, double w) {
  double num = in.energy + in.inverse_gain - std::max(in.inverse_gain - w, 0.0);
  for (std::size_t k = 0; k + 1 < slots; ++k) {
    num += in.harvest_means[k] + in.inverse_gain_means[k] -
           std::max(in.inverse_gain_means[k] - w, 0.0);
  }
  return num / static_cast<double>(slots);
}

WaterLevelResult solve_fixed_point(const WaterLevelInputs& in, std::size_t slots) {
  constexpr double kTol = 1e-9;
  auto phi = [&](double w) { return w - split_rhs(in, slots, w); };
  double lo = 0.0;
  double hi = in.energy + in.inverse_gain;
  const double phi_hi = phi(hi);
  if (phi_hi <= 0.0) {
    return {hi, std::abs(phi_hi), std::abs(phi_hi) > kTol};
  }
  // Invariant: phi(lo) <= 0 < phi(hi). phi is nondecreasing, so this
  // converges to the largest fixed point.
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (phi(mid) <= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return {lo, std::abs(phi(lo)), false};
}

}  // namespace

double water_level_rhs(const WaterLevelInputs& in, double w) {
  return split_rhs(in, static_cast<std::size_t>(in.slots_to_go()), w);
}

WaterLevelResult expected_water_level(const WaterLevelInputs& in, WaterLevelMode mode) {
  if (in.energy < 0.0) throw DomainError("stored energy must be nonnegative");
  if (!(in.inverse_gain > 0.0)) throw DomainError("inverse gain must be positive");
  if (in.harvest_means.size() != in.inverse_gain_means.size()) {
    throw std::invalid_argument("harvest and gain lookahead lengths differ");
  }
  const auto n = static_cast<std::size_t>(in.slots_to_go());
  if (mode == WaterLevelMode::kWholeHorizon) return solve_fixed_point(in, n);

  WaterLevelResult best = solve_fixed_point(in, 1);
  for (std::size_t slots = 2; slots <= n; ++slots) {
    const WaterLevelResult r = solve_fixed_point(in, slots);
    if (r.level < best.level) best = r;
  }
  return best;
}

InversionResult invert_water_level(double target_drain, const WaterLevelInputs& in,
                                   double ceiling) {
  if (target_drain < 0.0) throw DomainError("target power must be nonnegative");
  // The level reaches w* = target + c_n exactly when w* - RHS_e(w*) <= 0,
  // which is linear in e with slope -1/n. The current-slot plus term vanishes
  // because w* >= c_n.
  const std::size_t lookahead = in.harvest_means.size();
  double e = static_cast<double>(lookahead + 1) * target_drain;
  for (std::size_t k = 0; k < lookahead; ++k) {
    e += (in.inverse_gain - in.inverse_gain_means[k]) - in.harvest_means[k] +
         std::max(in.inverse_gain_means[k] - target_drain - in.inverse_gain, 0.0);
  }
  // The level is capped at e + c_n, so at least the target itself is needed.
  e = std::max(e, target_drain);
  if (e > ceiling) return {ceiling, true};
  return {e, false};
}

}  // namespace ehs

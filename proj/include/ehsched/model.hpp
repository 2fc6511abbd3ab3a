#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "ehsched/linalg.hpp"

namespace ehs {

// Units: energies in millijoules, powers in milliwatts, time in seconds.
// A power level p held for one slot of T seconds drains p*T mJ; everything
// downstream of model construction works in per-slot drains.

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when a harvest value or per-slot drain does not land on the energy
/// grid and cannot be represented exactly.
class OffGridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A finite-state first-order Markov chain together with the value attached
/// to each state. Transition rows give the distribution of the next state.
///
/// Lookahead means E[value after k steps | state] are served from a lazily
/// grown cache of P^k * values. The cache is shared between copies and
/// guarded by a mutex so concurrent readers are safe.
class MarkovChain {
 public:
  MarkovChain(Vector values, Matrix transitions);

  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  const Vector& values() const { return values_; }
  const Matrix& transitions() const { return transitions_; }

  /// E[value_{t+k} | state_t = state] using cached powers.
  double lookahead_mean(std::size_t state, long k) const;
  /// Same quantity computed from a fresh matrix power.
  double lookahead_mean_uncached(std::size_t state, long k) const;

  Vector stationary() const;
  double stationary_mean() const { return stationary().dot(values_); }

 private:
  struct Cache {
    std::mutex mutex;
    std::vector<Vector> means;  // means[k] = P^k * values
  };

  Vector values_;
  Matrix transitions_;
  std::shared_ptr<Cache> cache_;
};

/// Markov harvest process. States are per-slot harvest energies h_i in mJ and
/// q_ij = P(next harvest = h_j | current harvest = h_i).
class HarvestModel {
 public:
  HarvestModel(Vector states_mj, Matrix transitions, double slot_s);

  std::size_t size() const { return chain_.size(); }
  const Vector& states() const { return chain_.values(); }
  const Matrix& transitions() const { return chain_.transitions(); }
  double slot_duration() const { return slot_s_; }
  const MarkovChain& chain() const { return chain_; }

 private:
  MarkovChain chain_;
  double slot_s_;
};

/// Markov channel-gain process. A single state with gain 1 is the static
/// channel.
class ChannelModel {
 public:
  ChannelModel(Vector gains, Matrix transitions);
  static ChannelModel static_channel();

  std::size_t size() const { return gains_.size(); }
  const Vector& gains() const { return gains_.values(); }
  const Matrix& transitions() const { return gains_.transitions(); }
  bool is_static() const;

  const MarkovChain& gain_chain() const { return gains_; }
  /// Chain over the same transitions carrying 1/gamma.
  const MarkovChain& inverse_gain_chain() const { return inverse_gains_; }

 private:
  MarkovChain gains_;
  MarkovChain inverse_gains_;
};

/// Concave increasing map from received power (mW) to bits per full slot.
class RateFunction {
 public:
  RateFunction(std::string form, std::function<double(double)> bits_per_slot,
               double noise_power_mw, double bandwidth_hz = 0.0,
               double noise_psd_w_per_hz = 0.0);

  /// W*T*log2(1 + p / (N0*W)) with p in mW.
  static RateFunction shannon(double bandwidth_hz, double noise_psd_w_per_hz,
                              double slot_s);

  double operator()(double power_mw) const { return fn_(power_mw); }

  const std::string& form() const { return form_; }
  /// Receiver noise power in mW. Water-filling levels are expressed against
  /// noise_power / gamma.
  double noise_power_mw() const { return noise_mw_; }
  double bandwidth_hz() const { return bandwidth_hz_; }
  double noise_psd_w_per_hz() const { return noise_psd_; }

 private:
  std::string form_;
  std::function<double(double)> fn_;
  double noise_mw_;
  double bandwidth_hz_;
  double noise_psd_;
};

/// The discrete set U of transmit powers plus the rate function.
class PowerRateSet {
 public:
  /// Throws std::invalid_argument if levels are not strictly increasing and
  /// positive, or if bits-per-energy is not strictly decreasing across them.
  PowerRateSet(std::vector<double> levels_mw, RateFunction rate, double slot_s,
               bool includes_idle);

  std::size_t size() const { return levels_mw_.size(); }
  const std::vector<double>& levels_mw() const { return levels_mw_; }
  /// Per-slot energy drain of each level, mJ.
  const std::vector<double>& drains() const { return drains_; }
  double drain(std::size_t level) const { return drains_[level]; }
  double min_drain() const { return drains_.front(); }
  double max_drain() const { return drains_.back(); }
  double slot_duration() const { return slot_s_; }
  bool includes_idle() const { return includes_idle_; }
  const RateFunction& rate() const { return rate_; }

  /// Bits for a whole slot at per-slot drain `drain_mj` under gain `gamma`.
  double full_slot_bits(double drain_mj, double gamma) const {
    return rate_(gamma * drain_mj / slot_s_);
  }
  /// Noise expressed as per-slot energy, mJ.
  double noise_energy() const { return rate_.noise_power_mw() * slot_s_; }

 private:
  std::vector<double> levels_mw_;
  std::vector<double> drains_;
  RateFunction rate_;
  double slot_s_;
  bool includes_idle_;
};

/// Quantized energy axis {0, quantum, 2*quantum, ..., max_energy}.
class EnergyGrid {
 public:
  EnergyGrid(double quantum_mj = 1.0, double max_mj = 4096.0);

  double quantum() const { return quantum_; }
  double max_energy() const { return max_; }
  std::size_t points() const { return points_; }
  double energy(std::size_t index) const { return quantum_ * static_cast<double>(index); }

  bool on_grid(double e) const;
  /// Exact index of an on-grid energy, possibly past the ceiling; throws
  /// OffGridError for off-grid values.
  std::size_t index_of(double e) const;
  /// Nearest grid index, clamped into [0, points-1].
  std::size_t nearest_index(double e) const;
  double snap(double e) const { return energy(nearest_index(e)); }

 private:
  double quantum_;
  double max_;
  std::size_t points_;
};

/// Everything the solver and simulator need. Harvest states are snapped to the
/// grid on construction; per-slot drains must already be on it.
struct Problem {
  Problem(HarvestModel harvest, ChannelModel channel, PowerRateSet power_set,
          EnergyGrid grid);

  HarvestModel harvest;
  ChannelModel channel;
  PowerRateSet power_set;
  EnergyGrid grid;
  /// Largest |original - snapped| over the harvest states.
  double harvest_rounding_error = 0.0;

  bool idle_allowed() const { return power_set.includes_idle(); }
  double slot_duration() const { return harvest.slot_duration(); }
};

/// g_r: bits delivered in one slot with stored energy e at per-slot drain
/// `drain` and gain `gamma`. Zero drain means idle.
double bits_delivered(const PowerRateSet& set, double e, double drain,
                      double gamma = 1.0);

struct EnergyStep {
  double energy;
  bool clamped;
};

/// (e - drain)_+ + harvest, clamped to the grid ceiling.
EnergyStep energy_update(double e, double drain, double harvest,
                         const EnergyGrid& grid);

/// E[H_{n-k} | H_n = h_state]. lookahead must be >= 1.
double conditional_mean_harvest(const HarvestModel& model, std::size_t state,
                                long lookahead);

/// Mean harvest per slot under the stationary distribution.
double stationary_mean_harvest(const HarvestModel& model);

/// Two-state burst model: h = {0, 256} mJ, q00 = 0.9, q01 = 0.1,
/// q10 = 0.5, q11 = 0.5, one-second slots.
HarvestModel burst_harvest_model();

/// 802.11n-derived levels {5, 10, 23, 26, 74, 100, 159, 256} mW.
std::vector<double> wifi_power_levels_mw();

constexpr double kDefaultBandwidthHz = 40e6;
constexpr double kDefaultNoisePsd = 0.83e-9;

}  // namespace ehs

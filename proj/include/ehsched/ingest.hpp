#pragma once

#include <filesystem>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ehsched/model.hpp"

namespace ehs {

/// Trace-to-model settings. Defaults follow the roadtrip solar setup:
/// 43 cm^2 panel, 21% conversion, 30 s slots.
struct TraceSpec {
  double panel_area_cm2 = 43.0;
  double efficiency = 0.21;
  double slot_s = 30.0;
  int bins = 5;
};

/// Unparseable trace rows; `lines` holds 1-based line numbers.
class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(const std::string& what, std::vector<std::size_t> lines)
      : std::runtime_error(what), lines_(std::move(lines)) {}
  const std::vector<std::size_t>& lines() const { return lines_; }

 private:
  std::vector<std::size_t> lines_;
};

struct TraceSample {
  double time_s;
  double irradiance_w_m2;
};

/// Reads `timestamp_s,irradiance_w_m2` CSV with a header row.
std::vector<TraceSample> read_trace(std::istream& in);

/// Per-slot harvested energy in mJ, holding each sample until the next one.
std::vector<double> slot_energies(const std::vector<TraceSample>& trace, const TraceSpec& spec);

struct TraceModel {
  HarvestModel model;
  std::vector<std::size_t> row_counts;  // observed transitions out of each state
  std::vector<double> slot_energies;
  std::vector<std::size_t> slot_bins;
  bool degenerate = false;              // every slot fell in one bin
};

/// Equal-width binning of slot energies, empirical transition counts with
/// add-one smoothing on rows that saw no transitions.
TraceModel trace_to_markov(const std::vector<TraceSample>& trace, const TraceSpec& spec);
TraceModel trace_to_markov(const std::filesystem::path& path, const TraceSpec& spec);

/// Power set with the Shannon rate. Throws std::invalid_argument naming the
/// offending pair when levels are not strictly increasing or efficiency does
/// not strictly decrease.
PowerRateSet build_power_rate_set(const std::vector<double>& levels_mw, double bandwidth_hz,
                                  double noise_psd_w_per_hz, double slot_s,
                                  bool includes_idle = false);

enum class FadingKind { kRayleigh, kNakagami };

struct FadingSpec {
  FadingKind kind = FadingKind::kRayleigh;
  int levels = 7;
  double min_gain = 0.1;
  double max_gain = 1.9;
  double mixing = 0.5;          // 1 gives i.i.d. gains
  double nakagami_shape = 2.0;
};

/// Gains evenly spaced over [min_gain, max_gain] weighted by the unit-mean
/// power density of the fading law; F = (1-m) I + m 1 pi^T.
ChannelModel build_fading_model(const FadingSpec& spec);

/// Stationary weights used by build_fading_model.
Vector fading_weights(const FadingSpec& spec);

}  // namespace ehs

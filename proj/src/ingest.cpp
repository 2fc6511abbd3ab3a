#include "ehsched/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace ehs {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* end = t.data() + t.size();
  const auto res = std::from_chars(t.data(), end, out);
  return res.ec == std::errc() && res.ptr == end && std::isfinite(out);
}

}  // namespace

std::vector<TraceSample> read_trace(std::istream& in) {
  std::vector<TraceSample> samples;
  std::vector<std::size_t> bad;
  std::string line;
  std::size_t lineno = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto comma = line.find(',');
    TraceSample s{};
    if (comma == std::string::npos || !parse_double(line.substr(0, comma), s.time_s) ||
        !parse_double(line.substr(comma + 1), s.irradiance_w_m2) || s.irradiance_w_m2 < 0.0 ||
        (!samples.empty() && s.time_s <= samples.back().time_s)) {
      bad.push_back(lineno);
      continue;
    }
    samples.push_back(s);
  }
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << "unparseable trace rows at line";
    if (bad.size() > 1) msg << 's';
    for (std::size_t i = 0; i < bad.size(); ++i) msg << (i ? ", " : " ") << bad[i];
    throw TraceParseError(msg.str(), bad);
  }
  return samples;
}

std::vector<double> slot_energies(const std::vector<TraceSample>& trace, const TraceSpec& spec) {
  if (!(spec.panel_area_cm2 > 0.0) || !(spec.efficiency > 0.0) || spec.efficiency > 1.0 ||
      !(spec.slot_s > 0.0)) {
    throw std::invalid_argument("panel area, efficiency and slot length must be positive, efficiency <= 1");
  }
  if (trace.size() < 2) throw std::invalid_argument("trace needs at least two samples");
  const double t0 = trace.front().time_s;
  const double span = trace.back().time_s - t0;
  const auto slots = static_cast<std::size_t>(std::ceil(span / spec.slot_s - 1e-12));
  if (slots < 2) throw std::invalid_argument("trace spans fewer than two slots");

  // W/m^2 * m^2 * s = J; report mJ.
  const double scale = spec.panel_area_cm2 * 1e-4 * spec.efficiency * 1e3;
  std::vector<double> energy(slots, 0.0);
  const double end = t0 + static_cast<double>(slots) * spec.slot_s;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    double a = trace[i].time_s;
    const double b = std::min(i + 1 < trace.size() ? trace[i + 1].time_s : end, end);
    while (a < b) {
      const auto slot = std::min(static_cast<std::size_t>((a - t0) / spec.slot_s), slots - 1);
      const double slot_end = t0 + static_cast<double>(slot + 1) * spec.slot_s;
      const double upto = std::min(b, slot_end);
      energy[slot] += trace[i].irradiance_w_m2 * (upto - a) * scale;
      a = upto;
    }
  }
  return energy;
}

TraceModel trace_to_markov(const std::vector<TraceSample>& trace, const TraceSpec& spec) {
  if (spec.bins < 1) throw std::invalid_argument("need at least one quantization bin");
  const std::vector<double> energy = slot_energies(trace, spec);
  const auto [lo_it, hi_it] = std::minmax_element(energy.begin(), energy.end());
  const double lo = *lo_it;
  const double hi = *hi_it;

  const bool degenerate = !(hi - lo > 1e-9 * std::max(1.0, std::abs(hi)));
  const std::size_t bins = degenerate ? 1 : static_cast<std::size_t>(spec.bins);
  if (degenerate) {
    std::cerr << "warning: trace energy is constant; building a one-state model\n";
  }
  const double width = degenerate ? 0.0 : (hi - lo) / static_cast<double>(bins);

  std::vector<std::size_t> bin_of(energy.size(), 0);
  if (!degenerate) {
    for (std::size_t t = 0; t < energy.size(); ++t) {
      bin_of[t] = std::min(static_cast<std::size_t>((energy[t] - lo) / width), bins - 1);
    }
  }
  Vector states(static_cast<Eigen::Index>(bins));
  for (std::size_t b = 0; b < bins; ++b) {
    states(static_cast<Eigen::Index>(b)) = degenerate ? lo : lo + (static_cast<double>(b) + 0.5) * width;
  }

  Matrix counts = Matrix::Zero(static_cast<Eigen::Index>(bins), static_cast<Eigen::Index>(bins));
  for (std::size_t t = 0; t + 1 < energy.size(); ++t) {
    counts(static_cast<Eigen::Index>(bin_of[t]), static_cast<Eigen::Index>(bin_of[t + 1])) += 1.0;
  }
  std::vector<std::size_t> row_counts(bins);
  Matrix q(static_cast<Eigen::Index>(bins), static_cast<Eigen::Index>(bins));
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const double total = counts.row(i).sum();
    row_counts[static_cast<std::size_t>(i)] = static_cast<std::size_t>(total);
    if (total > 0.0) {
      q.row(i) = counts.row(i) / total;
    } else {
      q.row(i).setConstant(1.0 / static_cast<double>(bins));
    }
  }
  return TraceModel{HarvestModel(states, q, spec.slot_s), std::move(row_counts), energy,
                    std::move(bin_of), degenerate};
}

TraceModel trace_to_markov(const std::filesystem::path& path, const TraceSpec& spec) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file " + path.string());
  return trace_to_markov(read_trace(in), spec);
}

PowerRateSet build_power_rate_set(const std::vector<double>& levels_mw, double bandwidth_hz,
                                  double noise_psd_w_per_hz, double slot_s, bool includes_idle) {
  return PowerRateSet(levels_mw, RateFunction::shannon(bandwidth_hz, noise_psd_w_per_hz, slot_s),
                      slot_s, includes_idle);
}

Vector fading_weights(const FadingSpec& spec) {
  if (spec.levels < 1) throw DomainError("need at least one gain level");
  if (!(spec.min_gain > 0.0) || !(spec.max_gain >= spec.min_gain)) {
    throw DomainError("gain range must be positive and ordered");
  }
  if (spec.levels == 1) return Vector::Ones(1);
  if (spec.kind == FadingKind::kNakagami && !(spec.nakagami_shape >= 0.5)) {
    throw DomainError("Nakagami shape must be at least 0.5");
  }
  Vector w(spec.levels);
  const double step = (spec.max_gain - spec.min_gain) / (spec.levels - 1);
  for (int i = 0; i < spec.levels; ++i) {
    const double x = spec.min_gain + step * i;
    if (spec.kind == FadingKind::kRayleigh) {
      w(i) = std::exp(-x);
    } else {
      const double m = spec.nakagami_shape;
      w(i) = std::exp(m * std::log(m) + (m - 1.0) * std::log(x) - m * x - std::lgamma(m));
    }
  }
  return w / w.sum();
}

ChannelModel build_fading_model(const FadingSpec& spec) {
  if (!(spec.mixing > 0.0) || spec.mixing > 1.0) throw DomainError("mixing must lie in (0, 1]");
  const Vector pi = fading_weights(spec);
  const auto n = pi.size();
  Vector gains(n);
  if (n == 1) {
    gains(0) = 0.5 * (spec.min_gain + spec.max_gain);
    return ChannelModel(gains, Matrix::Ones(1, 1));
  }
  const double step = (spec.max_gain - spec.min_gain) / static_cast<double>(n - 1);
  for (Eigen::Index i = 0; i < n; ++i) gains(i) = spec.min_gain + step * static_cast<double>(i);
  Matrix f = (1.0 - spec.mixing) * Matrix::Identity(n, n) +
             spec.mixing * Vector::Ones(n) * pi.transpose();
  // Renormalize rows so they sum to one to machine precision.
  for (Eigen::Index i = 0; i < n; ++i) f.row(i) /= f.row(i).sum();
  return ChannelModel(gains, f);
}

}  // namespace ehs

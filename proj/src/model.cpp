#include "ehsched/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ehs {

namespace {

void require_strictly_increasing(const Vector& v, const char* what) {
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (!(v(i) > v(i - 1))) {
      throw std::invalid_argument(std::string(what) +
                                  " must be strictly increasing");
    }
  }
}

}  // namespace

MarkovChain::MarkovChain(Vector values, Matrix transitions)
    : values_(std::move(values)),
      transitions_(std::move(transitions)),
      cache_(std::make_shared<Cache>()) {
  if (values_.size() == 0) throw ChainError("chain needs at least one state");
  if (transitions_.rows() != values_.size()) {
    throw ChainError("transition matrix size does not match state count");
  }
  require_row_stochastic(transitions_);
  cache_->means.push_back(values_);
}

double MarkovChain::lookahead_mean(std::size_t state, long k) const {
  if (k < 0) throw std::invalid_argument("negative lookahead");
  if (state >= size()) throw std::out_of_range("chain state out of range");
  std::lock_guard<std::mutex> lock(cache_->mutex);
  auto& means = cache_->means;
  while (static_cast<long>(means.size()) <= k) {
    means.push_back(transitions_ * means.back());
  }
  return means[static_cast<std::size_t>(k)](static_cast<Eigen::Index>(state));
}

double MarkovChain::lookahead_mean_uncached(std::size_t state, long k) const {
  if (k < 0) throw std::invalid_argument("negative lookahead");
  if (state >= size()) throw std::out_of_range("chain state out of range");
  const Matrix pk = matrix_power(transitions_, k);
  return pk.row(static_cast<Eigen::Index>(state)).dot(values_);
}

Vector MarkovChain::stationary() const {
  return stationary_distribution(transitions_);
}

HarvestModel::HarvestModel(Vector states_mj, Matrix transitions, double slot_s)
    : chain_(std::move(states_mj), std::move(transitions)), slot_s_(slot_s) {
  if (!(slot_s_ > 0.0)) throw std::invalid_argument("slot duration must be positive");
  if ((chain_.values().array() < 0.0).any()) {
    throw std::invalid_argument("harvest states must be nonnegative");
  }
  require_strictly_increasing(chain_.values(), "harvest states");
}

ChannelModel::ChannelModel(Vector gains, Matrix transitions)
    : gains_(gains, transitions),
      inverse_gains_(gains.cwiseInverse(), transitions) {
  if (!(gains.array() > 0.0).all()) {
    throw std::invalid_argument("channel gains must be positive");
  }
  require_strictly_increasing(gains, "channel gains");
}

ChannelModel ChannelModel::static_channel() {
  return ChannelModel(Vector::Ones(1), Matrix::Ones(1, 1));
}

bool ChannelModel::is_static() const {
  return size() == 1 && gains()(0) == 1.0;
}

RateFunction::RateFunction(std::string form,
                           std::function<double(double)> bits_per_slot,
                           double noise_power_mw, double bandwidth_hz,
                           double noise_psd_w_per_hz)
    : form_(std::move(form)),
      fn_(std::move(bits_per_slot)),
      noise_mw_(noise_power_mw),
      bandwidth_hz_(bandwidth_hz),
      noise_psd_(noise_psd_w_per_hz) {
  if (!fn_) throw std::invalid_argument("rate function is empty");
  if (!(noise_mw_ > 0.0)) throw std::invalid_argument("noise power must be positive");
}

RateFunction RateFunction::shannon(double bandwidth_hz, double noise_psd_w_per_hz,
                                   double slot_s) {
  if (!(bandwidth_hz > 0.0) || !(noise_psd_w_per_hz > 0.0) || !(slot_s > 0.0)) {
    throw std::invalid_argument("shannon rate needs positive bandwidth, noise and slot");
  }
  const double noise_mw = noise_psd_w_per_hz * bandwidth_hz * 1e3;
  const double bits_scale = bandwidth_hz * slot_s;
  return RateFunction(
      "shannon",
      [noise_mw, bits_scale](double p) { return bits_scale * std::log2(1.0 + p / noise_mw); },
      noise_mw, bandwidth_hz, noise_psd_w_per_hz);
}

PowerRateSet::PowerRateSet(std::vector<double> levels_mw, RateFunction rate,
                           double slot_s, bool includes_idle)
    : levels_mw_(std::move(levels_mw)),
      rate_(std::move(rate)),
      slot_s_(slot_s),
      includes_idle_(includes_idle) {
  if (levels_mw_.empty()) throw std::invalid_argument("power set is empty");
  if (!(slot_s_ > 0.0)) throw std::invalid_argument("slot duration must be positive");
  for (std::size_t i = 0; i < levels_mw_.size(); ++i) {
    if (!(levels_mw_[i] > 0.0)) {
      throw std::invalid_argument("power levels must be positive");
    }
    if (i > 0 && !(levels_mw_[i] > levels_mw_[i - 1])) {
      std::ostringstream msg;
      msg << "power levels must be strictly increasing: " << levels_mw_[i - 1]
          << " mW followed by " << levels_mw_[i] << " mW";
      throw std::invalid_argument(msg.str());
    }
  }
  for (std::size_t i = 1; i < levels_mw_.size(); ++i) {
    const double lo = rate_(levels_mw_[i - 1]) / levels_mw_[i - 1];
    const double hi = rate_(levels_mw_[i]) / levels_mw_[i];
    if (!(hi < lo)) {
      std::ostringstream msg;
      msg << "bits per unit energy must strictly decrease over levels: "
          << levels_mw_[i - 1] << " mW gives " << lo << ", " << levels_mw_[i]
          << " mW gives " << hi;
      throw std::invalid_argument(msg.str());
    }
  }
  drains_.reserve(levels_mw_.size());
  for (double p : levels_mw_) drains_.push_back(p * slot_s_);
}

EnergyGrid::EnergyGrid(double quantum_mj, double max_mj)
    : quantum_(quantum_mj), max_(max_mj) {
  if (!(quantum_ > 0.0)) throw std::invalid_argument("energy quantum must be positive");
  if (!(max_ >= quantum_)) throw std::invalid_argument("grid ceiling below one quantum");
  const double steps = max_ / quantum_;
  const double rounded = std::round(steps);
  if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps)) {
    throw OffGridError("grid ceiling is not a multiple of the quantum");
  }
  points_ = static_cast<std::size_t>(rounded) + 1;
}

bool EnergyGrid::on_grid(double e) const {
  const double steps = e / quantum_;
  return std::abs(steps - std::round(steps)) <= 1e-9 * std::max(1.0, std::abs(steps));
}

std::size_t EnergyGrid::index_of(double e) const {
  if (e < 0.0 || !on_grid(e)) {
    std::ostringstream msg;
    msg << "energy " << e << " mJ is not a multiple of the " << quantum_
        << " mJ quantum";
    throw OffGridError(msg.str());
  }
  return static_cast<std::size_t>(std::llround(e / quantum_));
}

std::size_t EnergyGrid::nearest_index(double e) const {
  if (!(e > 0.0)) return 0;
  const double steps = std::round(e / quantum_);
  if (steps >= static_cast<double>(points_ - 1)) return points_ - 1;
  return static_cast<std::size_t>(steps);
}

Problem::Problem(HarvestModel harvest_in, ChannelModel channel_in,
                 PowerRateSet power_set_in, EnergyGrid grid_in)
    : harvest(std::move(harvest_in)),
      channel(std::move(channel_in)),
      power_set(std::move(power_set_in)),
      grid(grid_in) {
  if (std::abs(power_set.slot_duration() - harvest.slot_duration()) > 1e-12) {
    throw std::invalid_argument("power set and harvest model disagree on slot duration");
  }
  for (std::size_t i = 0; i < power_set.size(); ++i) {
    if (!grid.on_grid(power_set.drain(i))) {
      std::ostringstream msg;
      msg << "per-slot drain " << power_set.drain(i) << " mJ of level "
          << power_set.levels_mw()[i] << " mW is not a multiple of the "
          << grid.quantum() << " mJ quantum";
      throw OffGridError(msg.str());
    }
  }
  Vector snapped(harvest.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < harvest.size(); ++i) {
    const double h = harvest.states()(static_cast<Eigen::Index>(i));
    const double s = std::round(h / grid.quantum()) * grid.quantum();
    worst = std::max(worst, std::abs(s - h));
    snapped(static_cast<Eigen::Index>(i)) = s;
  }
  if (worst > 0.0) {
    // Throws if two states collapse onto the same grid point.
    harvest = HarvestModel(snapped, harvest.transitions(), harvest.slot_duration());
  }
  harvest_rounding_error = worst;
}

double bits_delivered(const PowerRateSet& set, double e, double drain,
                      double gamma) {
  if (e < 0.0) throw DomainError("stored energy must be nonnegative");
  if (!(gamma > 0.0)) throw DomainError("channel gain must be positive");
  if (drain < 0.0) throw DomainError("power decision must be nonnegative");
  if (drain == 0.0) return 0.0;
  return set.full_slot_bits(drain, gamma) * std::min(e / drain, 1.0);
}

EnergyStep energy_update(double e, double drain, double harvest,
                         const EnergyGrid& grid) {
  if (e < 0.0 || harvest < 0.0 || drain < 0.0) {
    throw DomainError("energy update needs nonnegative energy, drain and harvest");
  }
  const double next = std::max(e - drain, 0.0) + harvest;
  if (next > grid.max_energy()) return {grid.max_energy(), true};
  return {next, false};
}

double conditional_mean_harvest(const HarvestModel& model, std::size_t state,
                                long lookahead) {
  if (lookahead < 1) throw std::invalid_argument("lookahead must be at least one slot");
  return model.chain().lookahead_mean(state, lookahead);
}

double stationary_mean_harvest(const HarvestModel& model) {
  return model.chain().stationary_mean();
}

HarvestModel burst_harvest_model() {
  Vector h(2);
  h << 0.0, 256.0;
  Matrix q(2, 2);
  q << 0.9, 0.1, 0.5, 0.5;
  return HarvestModel(h, q, 1.0);
}

std::vector<double> wifi_power_levels_mw() {
  return {5, 10, 23, 26, 74, 100, 159, 256};
}

}  // namespace ehs

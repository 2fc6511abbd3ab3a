#include "ehsched/policies.hpp"

#include <algorithm>
#include <iostream>

#include "ehsched/offline.hpp"

namespace ehs {

namespace {

void require_slots(const PolicyContext& ctx, int max_horizon) {
  if (ctx.slots_to_go < 1 || ctx.slots_to_go > max_horizon) {
    throw std::out_of_range("slots to go outside the policy's horizon");
  }
  if (ctx.energy < 0.0) throw DomainError("stored energy must be nonnegative");
}

/// Largest level whose threshold is <= energy, or nullopt if none.
std::optional<int> largest_admissible(const double* thresholds, std::size_t levels, double energy) {
  for (std::size_t l = levels; l-- > 0;) {
    if (thresholds[l] <= energy) return static_cast<int>(l);
  }
  return std::nullopt;
}

}  // namespace

TablePolicy::TablePolicy(std::shared_ptr<const ValueTable> table) : table_(std::move(table)) {
  if (!table_) throw std::invalid_argument("table policy needs a solved table");
}

Decision TablePolicy::decide(const PolicyContext& ctx) const {
  require_slots(ctx, table_->horizon());
  const Problem& p = table_->problem();
  if (ctx.energy > p.grid.max_energy()) clamps_.fetch_add(1, std::memory_order_relaxed);
  const std::size_t k = p.grid.nearest_index(ctx.energy);
  const int code = table_->decision(ctx.slots_to_go, k, ctx.harvest_state, ctx.channel_state);
  if (code == kIdle) return Decision::idle();
  return Decision::at_level(p.power_set, code);
}

ExpectedThresholdPolicy::ExpectedThresholdPolicy(const Problem& problem, int max_horizon)
    : power_set_(problem.power_set),
      max_horizon_(max_horizon),
      harvest_states_(problem.harvest.size()) {
  if (max_horizon < 1) throw std::invalid_argument("horizon must be at least one slot");
  future_harvest_.assign(static_cast<std::size_t>(max_horizon) * harvest_states_, 0.0);
  for (std::size_t i = 0; i < harvest_states_; ++i) {
    double acc = 0.0;
    for (int n = 2; n <= max_horizon; ++n) {
      acc += conditional_mean_harvest(problem.harvest, i, n - 1);
      future_harvest_[static_cast<std::size_t>(n - 1) * harvest_states_ + i] = acc;
    }
  }
}

std::vector<double> ExpectedThresholdPolicy::thresholds(int n, std::size_t harvest_state) const {
  const double future =
      future_harvest_.at(static_cast<std::size_t>(n - 1) * harvest_states_ + harvest_state);
  std::vector<double> out(power_set_.size());
  out[0] = 0.0;
  for (std::size_t l = 1; l < power_set_.size(); ++l) {
    const double rho = power_set_.drain(l);
    out[l] = std::max(rho, rho * n - future);
  }
  return out;
}

Decision ExpectedThresholdPolicy::decide(const PolicyContext& ctx) const {
  require_slots(ctx, max_horizon_);
  const std::vector<double> l = thresholds(ctx.slots_to_go, ctx.harvest_state);
  // L(rho_min) = 0 makes rho_min always admissible.
  return Decision::at_level(power_set_, *largest_admissible(l.data(), l.size(), ctx.energy));
}

ExpectedWaterLevelPolicy::ExpectedWaterLevelPolicy(const Problem& problem, int max_horizon)
    : power_set_(problem.power_set),
      max_horizon_(max_horizon),
      harvest_states_(problem.harvest.size()),
      channel_states_(problem.channel.size()) {
  if (max_horizon < 1) throw std::invalid_argument("horizon must be at least one slot");
  const double noise = problem.power_set.noise_energy();
  const std::size_t levels = power_set_.size();
  thresholds_.assign(static_cast<std::size_t>(max_horizon) * harvest_states_ * channel_states_ * levels,
                     0.0);
  WaterLevelInputs in;
  for (int n = 1; n <= max_horizon; ++n) {
    for (std::size_t h = 0; h < harvest_states_; ++h) {
      for (std::size_t u = 0; u < channel_states_; ++u) {
        in.inverse_gain = noise / problem.channel.gains()(static_cast<Eigen::Index>(u));
        in.harvest_means.clear();
        in.inverse_gain_means.clear();
        for (int k = 1; k < n; ++k) {
          in.harvest_means.push_back(conditional_mean_harvest(problem.harvest, h, k));
          in.inverse_gain_means.push_back(noise *
                                          problem.channel.inverse_gain_chain().lookahead_mean(u, k));
        }
        const std::size_t base =
            ((static_cast<std::size_t>(n - 1) * harvest_states_ + h) * channel_states_ + u) * levels;
        for (std::size_t l = 0; l < levels; ++l) {
          const double rho = power_set_.drain(l);
          const InversionResult r =
              invert_water_level(rho, in, std::numeric_limits<double>::infinity());
          thresholds_[base + l] = std::max(rho, r.energy);
        }
      }
    }
  }
}

std::vector<double> ExpectedWaterLevelPolicy::thresholds(int n, std::size_t harvest_state,
                                                         std::size_t channel_state) const {
  const std::size_t levels = power_set_.size();
  const std::size_t base =
      ((static_cast<std::size_t>(n - 1) * harvest_states_ + harvest_state) * channel_states_ +
       channel_state) *
      levels;
  return {thresholds_.begin() + static_cast<std::ptrdiff_t>(base),
          thresholds_.begin() + static_cast<std::ptrdiff_t>(base + levels)};
}

Decision ExpectedWaterLevelPolicy::decide(const PolicyContext& ctx) const {
  require_slots(ctx, max_horizon_);
  const std::size_t levels = power_set_.size();
  const std::size_t base =
      ((static_cast<std::size_t>(ctx.slots_to_go - 1) * harvest_states_ + ctx.harvest_state) *
           channel_states_ +
       ctx.channel_state) *
      levels;
  const auto level = largest_admissible(thresholds_.data() + base, levels, ctx.energy);
  if (!level) return Decision::idle();
  return Decision::at_level(power_set_, *level);
}

Decision GreedyPolicy::decide(const PolicyContext& ctx) const {
  if (ctx.energy < 0.0) throw DomainError("stored energy must be nonnegative");
  for (std::size_t l = power_set_.size(); l-- > 0;) {
    if (power_set_.drain(l) <= ctx.energy) return Decision::at_level(power_set_, static_cast<int>(l));
  }
  return Decision::at_level(power_set_, 0);
}

SinglePowerPolicy::SinglePowerPolicy(const Problem& problem) : power_set_(problem.power_set) {
  const double mean = stationary_mean_harvest(problem.harvest);
  level_ = -1;
  for (std::size_t l = 0; l < power_set_.size(); ++l) {
    if (power_set_.drain(l) <= mean) level_ = static_cast<int>(l);
  }
  if (level_ < 0) {
    level_ = 0;
    fell_back_ = true;
    std::cerr << "warning: mean harvest " << mean
              << " mJ/slot is below the lowest level; single-power uses rho_min\n";
  }
}

Decision SinglePowerPolicy::decide(const PolicyContext& ctx) const {
  if (ctx.energy < 0.0) throw DomainError("stored energy must be nonnegative");
  if (ctx.energy <= 0.0) return Decision::idle();
  return Decision::at_level(power_set_, level_);
}

ToPolicy::ToPolicy(const Problem& problem) : mean_(stationary_mean_harvest(problem.harvest)) {}

Decision ToPolicy::decide(const PolicyContext& ctx) const {
  if (ctx.energy < 0.0) throw DomainError("stored energy must be nonnegative");
  return {std::min(ctx.energy, mean_), std::nullopt};
}

const std::vector<std::string>& policy_names() {
  static const std::vector<std::string> names = {
      "optimal-dp", "expected-threshold", "expected-water-level", "greedy", "single-power", "to"};
  return names;
}

PolicyPtr make_policy(const std::string& name, const Problem& problem, int max_horizon,
                      std::shared_ptr<const ValueTable> table) {
  if (name == "optimal-dp") {
    if (!table) table = std::make_shared<const ValueTable>(backward_induct(problem, max_horizon));
    return std::make_shared<TablePolicy>(std::move(table));
  }
  if (name == "expected-threshold") return std::make_shared<ExpectedThresholdPolicy>(problem, max_horizon);
  if (name == "expected-water-level") return std::make_shared<ExpectedWaterLevelPolicy>(problem, max_horizon);
  if (name == "greedy") return std::make_shared<GreedyPolicy>(problem);
  if (name == "single-power") return std::make_shared<SinglePowerPolicy>(problem);
  if (name == "to") return std::make_shared<ToPolicy>(problem);
  std::string valid;
  for (const auto& n : policy_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw UnknownPolicyError("unknown policy '" + name + "'; valid names: " + valid);
}

}  // namespace ehs

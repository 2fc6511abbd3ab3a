#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ehsched/dp.hpp"
#include "ehsched/model.hpp"

namespace ehs {

/// What an online policy sees at the start of a slot.
struct PolicyContext {
  int slots_to_go = 1;  // n, with n = 1 the last slot before the deadline
  double energy = 0.0;  // stored energy, mJ
  std::size_t harvest_state = 0;
  std::size_t channel_state = 0;
};

struct Decision {
  double drain = 0.0;              // per-slot energy, mJ; 0 means idle
  std::optional<int> level;        // index into U when the drain is a member

  static Decision idle() { return {}; }
  static Decision at_level(const PowerRateSet& set, int level) {
    return {set.drain(static_cast<std::size_t>(level)), level};
  }
};

/// Online policy. Implementations are immutable after construction and
/// decide() is reentrant.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual Decision decide(const PolicyContext& ctx) const = 0;
};

using PolicyPtr = std::shared_ptr<const Policy>;

class UnknownPolicyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Looks decisions up in a solved table at the nearest grid energy.
class TablePolicy final : public Policy {
 public:
  explicit TablePolicy(std::shared_ptr<const ValueTable> table);
  std::string name() const override { return "optimal-dp"; }
  Decision decide(const PolicyContext& ctx) const override;
  /// Lookups whose energy lay above the grid ceiling.
  std::uint64_t clamp_events() const { return clamps_.load(); }

 private:
  std::shared_ptr<const ValueTable> table_;
  mutable std::atomic<std::uint64_t> clamps_{0};
};

/// Largest level whose expected threshold
///   L_n(rho) = max(rho, n*rho - sum_{k=1}^{n-1} E[H_{n-k} | h])
/// does not exceed the stored energy; L_n(rho_min) = 0.
class ExpectedThresholdPolicy final : public Policy {
 public:
  ExpectedThresholdPolicy(const Problem& problem, int max_horizon);
  std::string name() const override { return "expected-threshold"; }
  Decision decide(const PolicyContext& ctx) const override;

  /// Thresholds for every level at (n, harvest state).
  std::vector<double> thresholds(int n, std::size_t harvest_state) const;

 private:
  PowerRateSet power_set_;
  int max_horizon_;
  std::size_t harvest_states_;
  std::vector<double> future_harvest_;  // [n-1][state]: expected harvest over n-1 slots
};

/// Expected water level thresholds: L_n(rho) is the least energy whose
/// expected water level reaches rho + c_n; idle below every threshold.
class ExpectedWaterLevelPolicy final : public Policy {
 public:
  ExpectedWaterLevelPolicy(const Problem& problem, int max_horizon);
  std::string name() const override { return "expected-water-level"; }
  Decision decide(const PolicyContext& ctx) const override;

  std::vector<double> thresholds(int n, std::size_t harvest_state,
                                 std::size_t channel_state) const;

 private:
  PowerRateSet power_set_;
  int max_horizon_;
  std::size_t harvest_states_;
  std::size_t channel_states_;
  std::vector<double> thresholds_;  // [n-1][h][u][level]
};

/// Highest level that fits in the stored energy, rho_min below that.
class GreedyPolicy final : public Policy {
 public:
  explicit GreedyPolicy(const Problem& problem) : power_set_(problem.power_set) {}
  std::string name() const override { return "greedy"; }
  Decision decide(const PolicyContext& ctx) const override;

 private:
  PowerRateSet power_set_;
};

/// Fixed level: the largest level not above the stationary mean harvest.
class SinglePowerPolicy final : public Policy {
 public:
  explicit SinglePowerPolicy(const Problem& problem);
  std::string name() const override { return "single-power"; }
  Decision decide(const PolicyContext& ctx) const override;
  int level() const { return level_; }
  /// True when the mean harvest is below rho_min and rho_min was used.
  bool fell_back() const { return fell_back_; }

 private:
  PowerRateSet power_set_;
  int level_ = 0;
  bool fell_back_ = false;
};

/// min(stored energy, stationary mean harvest), not projected onto U.
class ToPolicy final : public Policy {
 public:
  explicit ToPolicy(const Problem& problem);
  std::string name() const override { return "to"; }
  Decision decide(const PolicyContext& ctx) const override;
  double mean_harvest() const { return mean_; }

 private:
  double mean_;
};

const std::vector<std::string>& policy_names();

/// Builds a policy by CLI name. `table` is required for "optimal-dp".
PolicyPtr make_policy(const std::string& name, const Problem& problem, int max_horizon,
                      std::shared_ptr<const ValueTable> table = nullptr);

}  // namespace ehs

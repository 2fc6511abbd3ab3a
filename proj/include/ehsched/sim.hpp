#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ehsched/model.hpp"
#include "ehsched/policies.hpp"

namespace ehs {

/// Per-replication random stream: replication r of a given seed always sees
/// the same numbers regardless of which worker runs it.
class ReplicationRng {
 public:
  ReplicationRng(std::uint64_t seed, std::uint64_t replication);
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Index drawn from a probability row.
  std::size_t categorical(const Eigen::Ref<const Eigen::RowVectorXd>& probs);

 private:
  std::mt19937_64 engine_;
};

struct ExperimentSpec {
  int horizon = 1;
  int replications = 1;
  std::uint64_t seed = 1;
  double initial_energy = 0.0;
  /// Defaults: stationary harvest distribution, uniform channel state.
  std::optional<Vector> initial_harvest_distribution;
  std::optional<Vector> initial_channel_distribution;
  std::vector<PolicyPtr> policies;
  unsigned threads = 1;
  /// Keep full trajectories for the first K replications.
  int dump_trajectories = 0;
};

/// One sampled realization, chronological. harvest_states has N + 1 entries:
/// the state at slot N, the harvests arriving after slots N..2 (usable), and
/// the final-slot harvest H_0 (drawn, never usable). channel_states has N.
struct SamplePath {
  std::vector<std::size_t> harvest_states;
  std::vector<std::size_t> channel_states;
};

SamplePath sample_path(const Problem& problem, const ExperimentSpec& spec, int replication);
std::vector<SamplePath> sample_paths(const Problem& problem, const ExperimentSpec& spec);

struct SlotRecord {
  int n;             // slots to go
  double energy;     // stored energy at the start of the slot
  std::size_t harvest_state;
  std::size_t channel_state;
  double gain;
  double drain;      // per-slot energy of the decision
  double bits;
};

struct Trajectory {
  std::vector<SlotRecord> slots;  // chronological, slots[0] is n = N
  double total_bits = 0.0;
  double consumed = 0.0;          // sum of min(e_n, rho_n)
  double usable_harvest = 0.0;    // harvests that arrived before the deadline slot
  std::uint64_t clamps = 0;
};

/// Plays `policy` along one path from `initial_energy`.
Trajectory run_policy(const Policy& policy, const Problem& problem, const SamplePath& path,
                      double initial_energy);

/// Bit-weighted mean of (N - n + 1); nullopt when no bits were delivered.
std::optional<double> mean_delay(const Trajectory& trajectory);

/// Usable harvest values of a path (H_{N-1}, ..., H_1) in mJ.
std::vector<double> path_harvests(const Problem& problem, const SamplePath& path);
std::vector<double> path_gains(const Problem& problem, const SamplePath& path);

/// Continuous-power offline optimum on the path: stretched string on a
/// static channel, water-filling otherwise.
double offline_bits(const Problem& problem, const SamplePath& path, double initial_energy);

struct PolicySummary {
  std::string policy;
  double mean_bits_per_slot = 0.0;
  double mean_throughput_bps = 0.0;
  double se_throughput_bps = 0.0;
  double mean_delay_slots = 0.0;
  double se_delay_slots = 0.0;
  int delay_undefined = 0;
  double oracle_gap_mean_bps = 0.0;
  double oracle_gap_se_bps = 0.0;
  std::uint64_t clamps = 0;
  std::vector<double> totals;  // bits per replication
  std::vector<double> delays;  // NaN where undefined
  std::vector<Trajectory> dumped;
};

struct SimOutcome {
  int horizon = 0;
  int replications = 0;
  double slot_duration = 1.0;
  std::vector<double> oracle_totals;
  double oracle_mean_bps = 0.0;
  std::vector<PolicySummary> policies;

  const PolicySummary& find(const std::string& policy) const;
};

/// An online policy beat the offline oracle on some path: always a bug.
class DominanceViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs every policy on a common set of sampled paths.
SimOutcome compare(const Problem& problem, const ExperimentSpec& spec);

/// `policy,N,mean_throughput_bps,se,mean_delay_slots,se,oracle_gap_mean`
void write_aggregate_header(std::ostream& out);
void write_aggregate_rows(std::ostream& out, const SimOutcome& outcome);

/// `rep,n,e_mJ,h_state,gain,rho_mW,bits`
void write_trajectories(std::ostream& out, const PolicySummary& summary, double slot_duration);

}  // namespace ehs

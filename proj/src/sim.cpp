#include "ehsched/sim.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include "ehsched/offline.hpp"

namespace ehs {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

struct Moments {
  double mean = 0.0;
  double se = 0.0;
  int count = 0;
};

/// Mean and standard error, accumulated in index order with compensation.
Moments moments(const std::vector<double>& xs) {
  Moments m;
  double sum = 0.0;
  double comp = 0.0;
  for (double x : xs) {
    if (std::isnan(x)) continue;
    const double y = x - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
    ++m.count;
  }
  if (m.count == 0) return m;
  m.mean = sum / m.count;
  if (m.count > 1) {
    double ss = 0.0;
    for (double x : xs) {
      if (!std::isnan(x)) ss += (x - m.mean) * (x - m.mean);
    }
    m.se = std::sqrt(ss / (m.count - 1) / m.count);
  }
  return m;
}

}  // namespace

ReplicationRng::ReplicationRng(std::uint64_t seed, std::uint64_t replication)
    : engine_(splitmix64(splitmix64(seed) ^ (replication * 0xD1B54A32D192ED03ULL + 1))) {}

double ReplicationRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t ReplicationRng::categorical(const Eigen::Ref<const Eigen::RowVectorXd>& probs) {
  const double u = uniform();
  double acc = 0.0;
  const auto n = static_cast<std::size_t>(probs.size());
  for (std::size_t i = 0; i < n; ++i) {
    acc += probs(static_cast<Eigen::Index>(i));
    if (u < acc) return i;
  }
  // Rounding left u above the cumulative sum; take the last positive entry.
  for (std::size_t i = n; i-- > 0;) {
    if (probs(static_cast<Eigen::Index>(i)) > 0.0) return i;
  }
  return n - 1;
}

SamplePath sample_path(const Problem& problem, const ExperimentSpec& spec, int replication) {
  const Vector h0 = spec.initial_harvest_distribution.value_or(problem.harvest.chain().stationary());
  const Vector g0 = spec.initial_channel_distribution.value_or(
      Vector::Constant(static_cast<Eigen::Index>(problem.channel.size()),
                       1.0 / static_cast<double>(problem.channel.size())));
  ReplicationRng rng(spec.seed, static_cast<std::uint64_t>(replication));
  SamplePath path;
  const auto n = static_cast<std::size_t>(spec.horizon);
  path.harvest_states.reserve(n + 1);
  path.channel_states.reserve(n);
  path.harvest_states.push_back(rng.categorical(h0.transpose()));
  path.channel_states.push_back(rng.categorical(g0.transpose()));
  for (std::size_t t = 1; t <= n; ++t) {
    const auto h = static_cast<Eigen::Index>(path.harvest_states.back());
    path.harvest_states.push_back(rng.categorical(problem.harvest.transitions().row(h)));
    if (t < n) {
      const auto u = static_cast<Eigen::Index>(path.channel_states.back());
      path.channel_states.push_back(rng.categorical(problem.channel.transitions().row(u)));
    }
  }
  return path;
}

std::vector<SamplePath> sample_paths(const Problem& problem, const ExperimentSpec& spec) {
  std::vector<SamplePath> paths;
  paths.reserve(static_cast<std::size_t>(spec.replications));
  for (int r = 0; r < spec.replications; ++r) paths.push_back(sample_path(problem, spec, r));
  return paths;
}

Trajectory run_policy(const Policy& policy, const Problem& problem, const SamplePath& path,
                      double initial_energy) {
  const int horizon = static_cast<int>(path.channel_states.size());
  Trajectory traj;
  traj.slots.reserve(static_cast<std::size_t>(horizon));
  double e = initial_energy;
  for (int t = 0; t < horizon; ++t) {
    const int n = horizon - t;
    const std::size_t h = path.harvest_states[static_cast<std::size_t>(t)];
    const std::size_t u = path.channel_states[static_cast<std::size_t>(t)];
    const double gamma = problem.channel.gains()(static_cast<Eigen::Index>(u));
    const Decision d = policy.decide({n, e, h, u});
    if (d.drain < 0.0) throw std::logic_error(policy.name() + " emitted a negative power");
    const double bits = bits_delivered(problem.power_set, e, d.drain, gamma);
    traj.slots.push_back({n, e, h, u, gamma, d.drain, bits});
    traj.total_bits += bits;
    traj.consumed += std::min(e, d.drain);
    if (n > 1) {
      const double harvest = problem.harvest.states()(
          static_cast<Eigen::Index>(path.harvest_states[static_cast<std::size_t>(t + 1)]));
      traj.usable_harvest += harvest;
      const EnergyStep step = energy_update(e, d.drain, harvest, problem.grid);
      if (step.clamped) ++traj.clamps;
      e = step.energy;
    }
  }
  return traj;
}

std::optional<double> mean_delay(const Trajectory& trajectory) {
  const int horizon = static_cast<int>(trajectory.slots.size());
  double weighted = 0.0;
  double total = 0.0;
  for (const SlotRecord& s : trajectory.slots) {
    weighted += static_cast<double>(horizon - s.n + 1) * s.bits;
    total += s.bits;
  }
  if (!(total > 0.0)) return std::nullopt;
  return weighted / total;
}

std::vector<double> path_harvests(const Problem& problem, const SamplePath& path) {
  std::vector<double> out;
  const std::size_t horizon = path.channel_states.size();
  for (std::size_t t = 1; t < horizon; ++t) {
    out.push_back(problem.harvest.states()(static_cast<Eigen::Index>(path.harvest_states[t])));
  }
  return out;
}

std::vector<double> path_gains(const Problem& problem, const SamplePath& path) {
  std::vector<double> out;
  for (std::size_t u : path.channel_states) {
    out.push_back(problem.channel.gains()(static_cast<Eigen::Index>(u)));
  }
  return out;
}

double offline_bits(const Problem& problem, const SamplePath& path, double initial_energy) {
  const std::vector<double> harvests = path_harvests(problem, path);
  if (problem.channel.is_static()) {
    return solve_offline_static(problem.power_set, initial_energy, harvests).total_bits;
  }
  return solve_offline_fading(problem.power_set, initial_energy, harvests,
                              path_gains(problem, path))
      .total_bits;
}

const PolicySummary& SimOutcome::find(const std::string& policy) const {
  for (const PolicySummary& s : policies) {
    if (s.policy == policy) return s;
  }
  throw std::out_of_range("no results for policy " + policy);
}

SimOutcome compare(const Problem& problem, const ExperimentSpec& spec) {
  if (spec.horizon < 1) throw std::invalid_argument("horizon must be at least one slot");
  if (spec.replications < 1) throw std::invalid_argument("need at least one replication");
  if (spec.initial_energy < 0.0) throw DomainError("initial energy must be nonnegative");

  const auto reps = static_cast<std::size_t>(spec.replications);
  const std::size_t np = spec.policies.size();
  const double slot = problem.slot_duration();
  const double scale = 1.0 / (spec.horizon * slot);

  SimOutcome out;
  out.horizon = spec.horizon;
  out.replications = spec.replications;
  out.slot_duration = slot;
  out.oracle_totals.assign(reps, 0.0);
  out.policies.resize(np);
  std::vector<std::vector<std::uint64_t>> clamps(np, std::vector<std::uint64_t>(reps, 0));
  for (std::size_t p = 0; p < np; ++p) {
    out.policies[p].policy = spec.policies[p]->name();
    out.policies[p].totals.assign(reps, 0.0);
    out.policies[p].delays.assign(reps, std::numeric_limits<double>::quiet_NaN());
    out.policies[p].dumped.resize(
        std::min<std::size_t>(reps, static_cast<std::size_t>(std::max(spec.dump_trajectories, 0))));
  }

  // Each replication writes only its own slots, so results do not depend on
  // how replications are spread across workers.
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t r = first; r < reps; r += stride) {
      const SamplePath path = sample_path(problem, spec, static_cast<int>(r));
      const double oracle = offline_bits(problem, path, spec.initial_energy);
      out.oracle_totals[r] = oracle;
      for (std::size_t p = 0; p < np; ++p) {
        Trajectory traj = run_policy(*spec.policies[p], problem, path, spec.initial_energy);
        if (traj.total_bits > oracle + 1e-9 * std::max(1.0, std::abs(oracle))) {
          std::ostringstream msg;
          msg << std::setprecision(17) << spec.policies[p]->name() << " delivered "
              << traj.total_bits << " bits on replication " << r
              << ", above the offline optimum " << oracle;
          throw DominanceViolation(msg.str());
        }
        PolicySummary& s = out.policies[p];
        s.totals[r] = traj.total_bits;
        if (const auto d = mean_delay(traj)) s.delays[r] = *d;
        clamps[p][r] = traj.clamps;
        if (r < s.dumped.size()) s.dumped[r] = std::move(traj);
      }
    }
  };

  const unsigned threads = std::max(1u, spec.threads);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          work(t, threads);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }

  out.oracle_mean_bps = moments(out.oracle_totals).mean * scale;
  for (std::size_t p = 0; p < np; ++p) {
    PolicySummary& s = out.policies[p];
    const Moments bits = moments(s.totals);
    s.mean_bits_per_slot = bits.mean / spec.horizon;
    s.mean_throughput_bps = bits.mean * scale;
    s.se_throughput_bps = bits.se * scale;
    const Moments delay = moments(s.delays);
    s.mean_delay_slots = delay.mean;
    s.se_delay_slots = delay.se;
    s.delay_undefined = static_cast<int>(reps) - delay.count;
    std::vector<double> gaps(reps);
    for (std::size_t r = 0; r < reps; ++r) gaps[r] = out.oracle_totals[r] - s.totals[r];
    const Moments gap = moments(gaps);
    s.oracle_gap_mean_bps = gap.mean * scale;
    s.oracle_gap_se_bps = gap.se * scale;
    for (std::uint64_t c : clamps[p]) s.clamps += c;
  }
  return out;
}

void write_aggregate_header(std::ostream& out) {
  out << "policy,N,mean_throughput_bps,se,mean_delay_slots,se,oracle_gap_mean\n";
}

void write_aggregate_rows(std::ostream& out, const SimOutcome& outcome) {
  std::ostringstream line;
  line << std::setprecision(17);
  for (const PolicySummary& s : outcome.policies) {
    line << s.policy << ',' << outcome.horizon << ',' << s.mean_throughput_bps << ','
         << s.se_throughput_bps << ',' << s.mean_delay_slots << ',' << s.se_delay_slots << ','
         << s.oracle_gap_mean_bps << '\n';
  }
  out << line.str();
}

void write_trajectories(std::ostream& out, const PolicySummary& summary, double slot_duration) {
  std::ostringstream buf;
  buf << std::setprecision(17);
  buf << "rep,n,e_mJ,h_state,gain,rho_mW,bits\n";
  for (std::size_t r = 0; r < summary.dumped.size(); ++r) {
    for (const SlotRecord& s : summary.dumped[r].slots) {
      buf << r << ',' << s.n << ',' << s.energy << ',' << s.harvest_state << ',' << s.gain << ','
          << s.drain / slot_duration << ',' << s.bits << '\n';
    }
  }
  out << buf.str();
}

}  // namespace ehs

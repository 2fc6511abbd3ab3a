#include "doctest.h"

#include <cmath>
#include <sstream>

#include "ehsched/model_io.hpp"
#include "ehsched/policies.hpp"
#include "ehsched/sim.hpp"

using namespace ehs;

namespace {

Trajectory synthetic(const std::vector<double>& bits_by_slot) {
  Trajectory t;
  const int horizon = static_cast<int>(bits_by_slot.size());
  for (int i = 0; i < horizon; ++i) {
    t.slots.push_back({horizon - i, 0.0, 0, 0, 1.0, 0.0, bits_by_slot[static_cast<std::size_t>(i)]});
    t.total_bits += bits_by_slot[static_cast<std::size_t>(i)];
  }
  return t;
}

Problem constant_harvest(double h, double max_mj = 1024) {
  Vector s(1);
  s << h;
  return Problem(HarvestModel(s, Matrix::Ones(1, 1), 1.0), ChannelModel::static_channel(),
                 burst_problem(max_mj).power_set, EnergyGrid(1.0, max_mj));
}

}  // namespace

TEST_CASE("mean delay closed forms") {
  std::vector<double> first(10, 0.0);
  first[0] = 5.0;
  CHECK(*mean_delay(synthetic(first)) == 1.0);
  std::vector<double> last(10, 0.0);
  last[9] = 5.0;
  CHECK(*mean_delay(synthetic(last)) == 10.0);
  CHECK(*mean_delay(synthetic(std::vector<double>(10, 3.0))) == 5.5);
  CHECK_FALSE(mean_delay(synthetic(std::vector<double>(4, 0.0))).has_value());
}

TEST_CASE("sample paths") {
  const Problem p = burst_problem(512);
  ExperimentSpec spec;
  spec.horizon = 100;
  spec.replications = 10000;
  spec.seed = 42;

  SUBCASE("deterministic and seed dependent") {
    ExperimentSpec small = spec;
    small.replications = 50;
    const auto a = sample_paths(p, small);
    const auto b = sample_paths(p, small);
    for (std::size_t r = 0; r < a.size(); ++r) {
      CHECK(a[r].harvest_states == b[r].harvest_states);
      CHECK(a[r].channel_states == b[r].channel_states);
      CHECK(a[r].harvest_states.size() == 101);
      CHECK(a[r].channel_states.size() == 100);
    }
    small.seed = 43;
    const auto c = sample_paths(p, small);
    int differ = 0;
    for (std::size_t r = 0; r < a.size(); ++r) differ += a[r].harvest_states != c[r].harvest_states;
    CHECK(differ > 40);
  }
  SUBCASE("empirical transition frequencies") {
    double counts[2][2] = {{0, 0}, {0, 0}};
    for (int r = 0; r < spec.replications; ++r) {
      const SamplePath path = sample_path(p, spec, r);
      for (std::size_t t = 0; t + 1 < path.harvest_states.size(); ++t) {
        counts[path.harvest_states[t]][path.harvest_states[t + 1]] += 1.0;
      }
    }
    const double q[2][2] = {{0.9, 0.1}, {0.5, 0.5}};
    for (int i = 0; i < 2; ++i) {
      const double row = counts[i][0] + counts[i][1];
      for (int j = 0; j < 2; ++j) {
        const double freq = counts[i][j] / row;
        const double se = std::sqrt(q[i][j] * (1 - q[i][j]) / row);
        CHECK(std::abs(freq - q[i][j]) <= 3 * se);
      }
    }
  }
  SUBCASE("single-state chains give identical paths") {
    const Problem c = constant_harvest(10);
    ExperimentSpec s = spec;
    s.replications = 20;
    const auto paths = sample_paths(c, s);
    for (const auto& path : paths) CHECK(path.harvest_states == paths[0].harvest_states);
  }
}

TEST_CASE("trajectories") {
  SUBCASE("no energy at all") {
    const Problem p = constant_harvest(0);
    ExperimentSpec spec;
    spec.horizon = 8;
    const SamplePath path = sample_path(p, spec, 0);
    const Trajectory t = run_policy(ToPolicy(p), p, path, 0.0);
    CHECK(t.total_bits == 0.0);
    CHECK_FALSE(mean_delay(t).has_value());
    CHECK(run_policy(GreedyPolicy(p), p, path, 0.0).total_bits == 0.0);
  }
  SUBCASE("constant harvest equal to a level is spent every slot") {
    const Problem p = constant_harvest(26);
    ExperimentSpec spec;
    spec.horizon = 12;
    const SamplePath path = sample_path(p, spec, 0);
    const Trajectory t = run_policy(GreedyPolicy(p), p, path, 26.0);
    for (const SlotRecord& s : t.slots) {
      CHECK(s.drain == 26.0);
      CHECK(s.energy == 26.0);
    }
    // Eleven usable harvests; the final one arrives too late.
    CHECK(t.usable_harvest == 11 * 26.0);
    CHECK(t.consumed == 12 * 26.0);
  }
  SUBCASE("energy conservation and clamps") {
    const Problem p = burst_problem(300);
    ExperimentSpec spec;
    spec.horizon = 40;
    const SinglePowerPolicy sp(p);
    std::uint64_t clamps = 0;
    for (int r = 0; r < 200; ++r) {
      const SamplePath path = sample_path(p, spec, r);
      const Trajectory t = run_policy(sp, p, path, 0.0);
      CHECK(t.consumed <= t.usable_harvest + 1e-9);
      clamps += t.clamps;
    }
    CHECK(clamps > 0);  // 26 mJ/slot against bursts of 256 overflows a 300 mJ store
  }
}

TEST_CASE("comparison on the burst model") {
  const Problem p = burst_problem(4096);
  const int horizon = 20;
  auto table = std::make_shared<const ValueTable>(backward_induct(p, horizon));
  ExperimentSpec spec;
  spec.horizon = horizon;
  spec.replications = 4000;
  spec.seed = 9;
  for (const std::string& name : policy_names()) {
    if (name == "expected-water-level") continue;
    spec.policies.push_back(make_policy(name, p, horizon, table));
  }
  const SimOutcome out = compare(p, spec);
  const PolicySummary& opt = out.find("optimal-dp");

  // Expected value of the table under the initial distribution.
  const Vector pi = p.harvest.chain().stationary();
  const double v = pi(0) * table->value(horizon, 0, 0, 0) + pi(1) * table->value(horizon, 0, 1, 0);
  CHECK(std::abs(opt.mean_bits_per_slot * horizon - v) <= 3 * opt.se_throughput_bps * horizon);

  for (const PolicySummary& s : out.policies) {
    const double slack = 2 * std::hypot(opt.se_throughput_bps, s.se_throughput_bps);
    CHECK(opt.mean_throughput_bps >= s.mean_throughput_bps - slack);
    CHECK(out.oracle_mean_bps >= s.mean_throughput_bps);
    CHECK(s.mean_delay_slots >= 1.0);
    CHECK(s.mean_delay_slots <= horizon);
    for (std::size_t r = 0; r < s.totals.size(); ++r) REQUIRE(out.oracle_totals[r] >= s.totals[r]);
  }
  CHECK(out.find("expected-threshold").mean_throughput_bps >= out.find("to").mean_throughput_bps);
  CHECK_THROWS_AS(out.find("missing"), std::out_of_range);
}

TEST_CASE("threaded and serial runs agree") {
  const Problem p = burst_problem(2048);
  ExperimentSpec spec;
  spec.horizon = 30;
  spec.replications = 999;
  spec.seed = 5;
  spec.policies = {make_policy("expected-threshold", p, 30), make_policy("to", p, 30)};
  spec.dump_trajectories = 3;
  const SimOutcome a = compare(p, spec);
  spec.threads = 4;
  const SimOutcome b = compare(p, spec);
  CHECK(a.oracle_totals == b.oracle_totals);
  for (std::size_t i = 0; i < a.policies.size(); ++i) {
    CHECK(a.policies[i].totals == b.policies[i].totals);
    CHECK(a.policies[i].mean_throughput_bps == b.policies[i].mean_throughput_bps);
    CHECK(a.policies[i].se_throughput_bps == b.policies[i].se_throughput_bps);
    CHECK(a.policies[i].mean_delay_slots == b.policies[i].mean_delay_slots);
    CHECK(a.policies[i].dumped.size() == 3);
  }
  std::ostringstream x;
  std::ostringstream y;
  write_aggregate_rows(x, a);
  write_aggregate_rows(y, b);
  CHECK(x.str() == y.str());
}

TEST_CASE("csv output") {
  std::ostringstream h;
  write_aggregate_header(h);
  CHECK(h.str() == "policy,N,mean_throughput_bps,se,mean_delay_slots,se,oracle_gap_mean\n");

  const Problem p = burst_problem(512);
  ExperimentSpec spec;
  spec.horizon = 3;
  spec.replications = 2;
  spec.policies = {make_policy("greedy", p, 3)};
  spec.dump_trajectories = 1;
  const SimOutcome out = compare(p, spec);
  std::ostringstream t;
  write_trajectories(t, out.policies[0], out.slot_duration);
  std::istringstream lines(t.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "rep,n,e_mJ,h_state,gain,rho_mW,bits");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("bad experiment specs") {
  const Problem p = burst_problem(64);
  ExperimentSpec spec;
  spec.horizon = 0;
  CHECK_THROWS_AS(compare(p, spec), std::invalid_argument);
  spec.horizon = 2;
  spec.replications = 0;
  CHECK_THROWS_AS(compare(p, spec), std::invalid_argument);
}

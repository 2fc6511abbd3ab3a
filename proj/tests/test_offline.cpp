#include "doctest.h"

#include <cmath>
#include <functional>
#include <random>

#include "ehsched/offline.hpp"

using namespace ehs;

namespace {

PowerRateSet wifi_set() {
  return PowerRateSet(wifi_power_levels_mw(),
                      RateFunction::shannon(kDefaultBandwidthHz, kDefaultNoisePsd, 1.0), 1.0, false);
}

// Maximizer of a concave function on [lo, hi].
double ternary_max(const std::function<double(double)>& f, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double a = lo + (hi - lo) / 3.0;
    const double b = hi - (hi - lo) / 3.0;
    if (f(a) < f(b)) {
      lo = a;
    } else {
      hi = b;
    }
  }
  return f(0.5 * (lo + hi));
}

// Best continuous schedule over two or three slots by nested search.
double brute_fading(const PowerRateSet& set, double e0, const std::vector<double>& h,
                    const std::vector<double>& g) {
  auto bits = [&](std::size_t t, double p) { return set.full_slot_bits(std::max(p, 0.0), g[t]); };
  if (g.size() == 2) {
    return ternary_max([&](double p1) { return bits(0, p1) + bits(1, e0 - p1 + h[0]); }, 0.0, e0);
  }
  return ternary_max(
      [&](double p1) {
        const double e1 = e0 - p1 + h[0];
        return bits(0, p1) +
               ternary_max([&](double p2) { return bits(1, p2) + bits(2, e1 - p2 + h[1]); }, 0.0, e1);
      },
      0.0, e0);
}

WaterLevelInputs random_inputs(std::mt19937_64& rng, double noise) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  WaterLevelInputs in;
  const int n = 1 + static_cast<int>(u(rng) * 40);
  in.energy = u(rng) < 0.1 ? 0.0 : 600.0 * u(rng);
  in.inverse_gain = noise / (0.1 + 1.8 * u(rng));
  for (int k = 1; k < n; ++k) {
    in.harvest_means.push_back(200.0 * u(rng));
    in.inverse_gain_means.push_back(noise / (0.1 + 1.8 * u(rng)));
  }
  return in;
}

}  // namespace

TEST_CASE("static offline power examples") {
  const std::vector<double> zeros{0.0, 0.0};
  CHECK(offline_power_static(9.0, zeros) == doctest::Approx(3.0));
  const std::vector<double> flat{4.0, 4.0, 4.0, 4.0};
  CHECK(offline_power_static(4.0, flat) == doctest::Approx(4.0));
  CHECK(offline_power_static(7.0, {}) == 7.0);
  const std::vector<double> neg{1.0, -1.0};
  CHECK_THROWS_AS(offline_power_static(3.0, neg), DomainError);
}

TEST_CASE("stretched string schedules") {
  const PowerRateSet set = wifi_set();
  SUBCASE("no harvest: equal split") {
    const std::vector<double> h(4, 0.0);
    const OfflineSolution s = solve_offline_static(set, 100.0, h);
    REQUIRE(s.drains.size() == 5);
    for (double d : s.drains) CHECK(d == doctest::Approx(20.0));
    CHECK(s.total_bits == doctest::Approx(5.0 * set.full_slot_bits(20.0, 1.0)));
    CHECK(s.min_margin() == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("a huge last harvest cannot fund earlier slots") {
    const std::vector<double> h{0.0, 0.0, 1e6};
    const OfflineSolution s = solve_offline_static(set, 30.0, h);
    for (int t = 0; t < 3; ++t) CHECK(s.drains[static_cast<std::size_t>(t)] == doctest::Approx(10.0));
    CHECK(s.drains[3] == doctest::Approx(1e6));
  }
  SUBCASE("random realizations: causality and nondecreasing power") {
    std::mt19937_64 rng(3);
    std::bernoulli_distribution burst(0.2);
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<double> h(30);
      for (double& x : h) x = burst(rng) ? 256.0 : 0.0;
      const OfflineSolution s = solve_offline_static(set, trial % 3 == 0 ? 0.0 : 57.0, h);
      CHECK(s.min_margin() >= -1e-9);
      for (std::size_t t = 1; t < s.drains.size(); ++t) {
        REQUIRE(s.drains[t] >= s.drains[t - 1] - 1e-9);
      }
      // Whatever is left at the deadline is wasted; the schedule spends it.
      CHECK(s.energies.back() - s.drains.back() == doctest::Approx(0.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("fading water-filling matches brute force on short horizons") {
  const PowerRateSet set = wifi_set();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t slots = trial % 2 == 0 ? 2 : 3;
    std::vector<double> h(slots - 1);
    std::vector<double> g(slots);
    for (double& x : h) x = u(rng) < 0.5 ? 0.0 : 300.0 * u(rng);
    for (double& x : g) x = 0.1 + 1.8 * u(rng);
    const double e0 = 200.0 * u(rng);
    const OfflineSolution s = solve_offline_fading(set, e0, h, g);
    const double brute = brute_fading(set, e0, h, g);
    REQUIRE(s.total_bits >= brute * (1.0 - 1e-9));
    REQUIRE(s.total_bits <= brute * (1.0 + 1e-9) + 1e-6);
    CHECK(s.min_margin() >= -1e-9);
    for (std::size_t t = 1; t < slots; ++t) CHECK(s.water_levels[t] >= s.water_levels[t - 1] - 1e-9);
  }
}

TEST_CASE("fading water levels are nondecreasing on longer horizons") {
  const PowerRateSet set = wifi_set();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> h(40);
    std::vector<double> g(41);
    for (double& x : h) x = u(rng) < 0.2 ? 256.0 : 0.0;
    for (double& x : g) x = 0.1 + 1.8 * u(rng);
    const OfflineSolution s = solve_offline_fading(set, 0.0, h, g);
    CHECK(s.min_margin() >= -1e-9);
    for (std::size_t t = 1; t < g.size(); ++t) REQUIRE(s.water_levels[t] >= s.water_levels[t - 1] - 1e-9);
  }
}

TEST_CASE("unit gains reduce water-filling to the stretched string") {
  const PowerRateSet set = wifi_set();
  const std::vector<double> h{0, 256, 0, 0, 256, 0, 0, 0, 0};
  const std::vector<double> g(h.size() + 1, 1.0);
  const OfflineSolution a = solve_offline_static(set, 40.0, h);
  const OfflineSolution b = solve_offline_fading(set, 40.0, h, g);
  for (std::size_t t = 0; t < g.size(); ++t) CHECK(a.drains[t] == doctest::Approx(b.drains[t]));
  CHECK(a.total_bits == doctest::Approx(b.total_bits).epsilon(1e-12));
}

TEST_CASE("expected water level examples") {
  const double c = wifi_set().noise_energy();
  WaterLevelInputs last;
  last.energy = 42.0;
  last.inverse_gain = c / 0.7;
  CHECK(expected_water_level(last).level == doctest::Approx(42.0 + c / 0.7));

  SUBCASE("unit gains give the a=1 stretched string term, capped by the stored energy") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 300.0);
    for (int trial = 0; trial < 200; ++trial) {
      WaterLevelInputs in;
      in.energy = u(rng);
      in.inverse_gain = c;
      double sum = in.energy;
      const int n = 1 + trial % 25;
      for (int k = 1; k < n; ++k) {
        in.harvest_means.push_back(u(rng) < 100 ? u(rng) : 0.0);
        in.inverse_gain_means.push_back(c);
        sum += in.harvest_means.back();
      }
      const WaterLevelResult r = expected_water_level(in);
      CHECK(std::abs((r.level - c) - std::min(in.energy, sum / n)) <= 1e-9 * std::max(1.0, sum));
    }
  }
  SUBCASE("nothing to allocate") {
    WaterLevelInputs in;
    in.energy = 0.0;
    in.inverse_gain = c / 0.1;  // worst gain now
    for (int k = 0; k < 5; ++k) {
      in.harvest_means.push_back(0.0);
      in.inverse_gain_means.push_back(c / (0.5 + 0.2 * k));
    }
    const WaterLevelResult r = expected_water_level(in);
    CHECK(std::max(r.level - in.inverse_gain, 0.0) == 0.0);
  }
}

TEST_CASE("expected water level residuals and monotonicity") {
  const double c = wifi_set().noise_energy();
  std::mt19937_64 rng(99);
  int flagged = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    WaterLevelInputs in = random_inputs(rng, c);
    const WaterLevelResult r = expected_water_level(in);
    if (r.no_sign_change) {
      ++flagged;
    } else {
      REQUIRE(r.residual <= 1e-9);
      CHECK(std::abs(r.level - water_level_rhs(in, r.level)) <= 1e-9);
    }
    WaterLevelInputs more = in;
    more.energy += 10.0;
    CHECK(expected_water_level(more).level >= r.level - 1e-9);
    if (!in.harvest_means.empty()) {
      more = in;
      more.harvest_means.back() += 25.0;
      CHECK(expected_water_level(more).level >= r.level - 1e-9);
    }
    // The split minimum is never above the whole-horizon level.
    CHECK(expected_water_level(in, WaterLevelMode::kMinOverSplits).level <= r.level + 1e-9);
  }
  CHECK(flagged < 3000);
}

TEST_CASE("closed-form inversion agrees with the forward map") {
  const double c = wifi_set().noise_energy();
  std::mt19937_64 rng(1234);
  const std::vector<double> drains{5, 10, 23, 26, 74, 100, 159, 256};
  for (int trial = 0; trial < 3000; ++trial) {
    WaterLevelInputs in = random_inputs(rng, c);
    const double target = drains[static_cast<std::size_t>(trial) % drains.size()];
    const InversionResult inv = invert_water_level(target, in, 1e9);
    REQUIRE_FALSE(inv.unreachable);
    CHECK(inv.energy >= target);
    in.energy = inv.energy;
    const double goal = target + in.inverse_gain;
    CHECK(expected_water_level(in).level >= goal - 1e-9 * std::max(1.0, goal));
    if (inv.energy > target + 1e-6) {
      in.energy = inv.energy - 1e-6;
      CHECK(expected_water_level(in).level < goal);
    }
  }
}

TEST_CASE("inversion examples") {
  const double c = wifi_set().noise_energy();
  WaterLevelInputs one;
  one.inverse_gain = c / 0.4;
  CHECK(invert_water_level(74.0, one, 4096).energy == 74.0);

  WaterLevelInputs dry;
  dry.inverse_gain = c;
  for (int k = 0; k < 6; ++k) {
    dry.harvest_means.push_back(0.0);
    dry.inverse_gain_means.push_back(c);
  }
  CHECK(invert_water_level(26.0, dry, 4096).energy == doctest::Approx(7 * 26.0));

  WaterLevelInputs wet = dry;
  for (double& h : wet.harvest_means) h = 1e5;
  CHECK(invert_water_level(26.0, wet, 4096).energy == 26.0);

  const InversionResult capped = invert_water_level(256.0, dry, 1000.0);
  CHECK(capped.unreachable);
  CHECK(capped.energy == 1000.0);
}

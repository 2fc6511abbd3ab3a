#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "ehsched/ingest.hpp"

using namespace ehs;

namespace {

std::vector<TraceSample> trace_from(const std::vector<double>& irradiance, double step = 30.0) {
  std::vector<TraceSample> t;
  for (std::size_t i = 0; i < irradiance.size(); ++i) t.push_back({step * static_cast<double>(i), irradiance[i]});
  return t;
}

}  // namespace

TEST_CASE("slot energy integration") {
  const TraceSpec spec;
  // 1000 W/m^2 * 43e-4 m^2 * 0.21 * 30 s = 27.09 J.
  const auto e = slot_energies(trace_from({1000, 1000, 1000}), spec);
  REQUIRE(e.size() == 2);
  CHECK(e[0] == doctest::Approx(27090.0));
  CHECK(e[1] == doctest::Approx(27090.0));

  // Samples every 10 s, held until the next one.
  const auto f = slot_energies(trace_from({0, 100, 200, 300, 400, 500, 600}, 10.0), spec);
  REQUIRE(f.size() == 2);
  const double per = 43e-4 * 0.21 * 10.0 * 1e3;
  CHECK(f[0] == doctest::Approx(per * 300));
  CHECK(f[1] == doctest::Approx(per * 1200));

  CHECK_THROWS_AS(slot_energies(trace_from({1, 1}), spec), std::invalid_argument);
  TraceSpec bad;
  bad.efficiency = 1.5;
  CHECK_THROWS_AS(slot_energies(trace_from({1, 1, 1}), bad), std::invalid_argument);
}

TEST_CASE("trace parsing reports bad lines") {
  std::istringstream ok("timestamp_s,irradiance_w_m2\n0,10\n30,20\n\n60,30\n");
  CHECK(read_trace(ok).size() == 3);

  std::istringstream bad("timestamp_s,irradiance_w_m2\n0,10\nthirty,20\n60,-3\n90\n80,5\n120,1\n");
  try {
    read_trace(bad);
    FAIL("expected a parse error");
  } catch (const TraceParseError& e) {
    CHECK(e.lines() == std::vector<std::size_t>{3, 4, 5});
    CHECK(std::string(e.what()).find("3, 4, 5") != std::string::npos);
  }
  std::istringstream back("t,i\n0,1\n30,1\n20,1\n");
  CHECK_THROWS_AS(read_trace(back), TraceParseError);
}

TEST_CASE("trace to markov") {
  const TraceSpec spec;
  SUBCASE("constant trace") {
    const TraceModel m = trace_to_markov(trace_from(std::vector<double>(20, 500.0)), spec);
    CHECK(m.degenerate);
    CHECK(m.model.size() == 1);
    CHECK(m.model.transitions()(0, 0) == 1.0);
  }
  SUBCASE("alternating two levels") {
    std::vector<double> irr;
    for (int i = 0; i < 41; ++i) irr.push_back(i % 2 == 0 ? 100.0 : 800.0);
    TraceSpec two = spec;
    two.bins = 2;
    const TraceModel m = trace_to_markov(trace_from(irr), two);
    CHECK(m.model.size() == 2);
    CHECK(m.model.transitions()(0, 1) == doctest::Approx(1.0));
    CHECK(m.model.transitions()(1, 0) == doctest::Approx(1.0));
    CHECK(m.row_counts[0] + m.row_counts[1] == 39);
  }
  SUBCASE("empty rows are smoothed to uniform") {
    // Three bins, the middle one never visited.
    std::vector<double> irr;
    for (int i = 0; i < 21; ++i) irr.push_back(i % 2 == 0 ? 0.0 : 900.0);
    TraceSpec three = spec;
    three.bins = 3;
    const TraceModel m = trace_to_markov(trace_from(irr), three);
    CHECK(m.row_counts[1] == 0);
    CHECK(m.model.transitions()(1, 1) == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("estimated chain reproduces the bin histogram") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> irr;
    double level = 300.0;
    for (int i = 0; i < 4000; ++i) {
      if (u(rng) < 0.2) level = 1000.0 * u(rng);
      irr.push_back(level);
    }
    TraceSpec five = spec;
    const TraceModel m = trace_to_markov(trace_from(irr), five);
    REQUIRE(m.model.size() == 5);
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(m.model.transitions().row(i).sum() == doctest::Approx(1.0));
    const Vector pi = m.model.chain().stationary();
    const double slots = static_cast<double>(m.slot_bins.size());
    for (std::size_t b = 0; b < 5; ++b) {
      const double freq =
          static_cast<double>(std::count(m.slot_bins.begin(), m.slot_bins.end(), b)) / slots;
      const double se = std::sqrt(freq * (1 - freq) / slots);
      CHECK(std::abs(pi(static_cast<Eigen::Index>(b)) - freq) <= 3 * se + 1e-12);
    }
  }
}

TEST_CASE("power rate sets from parameters") {
  const PowerRateSet set = build_power_rate_set({5, 10, 23, 26, 74, 100, 159, 256}, 40e6, 0.83e-9, 1.0);
  CHECK(set.size() == 8);
  CHECK(256.0 / set.rate().noise_power_mw() == doctest::Approx(7.71).epsilon(1e-3));
  CHECK_THROWS_AS(build_power_rate_set({1, 1}, 40e6, 0.83e-9, 1.0), std::invalid_argument);
  const RateFunction log2rate("log2", [](double p) { return std::log2(1.0 + p); }, 1.0);
  const PowerRateSet small({1, 2}, log2rate, 1.0, false);
  CHECK(small.full_slot_bits(1, 1) / 1 == doctest::Approx(1.0));
  CHECK(small.full_slot_bits(2, 1) / 2 == doctest::Approx(0.79248).epsilon(1e-4));
}

TEST_CASE("fading models") {
  FadingSpec spec;
  SUBCASE("rayleigh defaults") {
    const ChannelModel c = build_fading_model(spec);
    REQUIRE(c.size() == 7);
    CHECK(c.gains()(0) == doctest::Approx(0.1));
    CHECK(c.gains()(6) == doctest::Approx(1.9));
    Vector w(7);
    for (int i = 0; i < 7; ++i) w(i) = std::exp(-(0.1 + 0.3 * i));
    w /= w.sum();
    const Vector pi = c.gain_chain().stationary();
    for (int i = 0; i < 7; ++i) CHECK(pi(i) == doctest::Approx(w(i)).epsilon(1e-10));
  }
  SUBCASE("stationary weights do not depend on the mixing") {
    spec.kind = FadingKind::kNakagami;
    const Vector w = fading_weights(spec);
    for (double m : {0.05, 0.3, 0.9}) {
      spec.mixing = m;
      const Vector pi = build_fading_model(spec).gain_chain().stationary();
      CHECK((pi - w).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SUBCASE("i.i.d. gains") {
    spec.mixing = 1.0;
    const ChannelModel c = build_fading_model(spec);
    const Vector w = fading_weights(spec);
    for (Eigen::Index i = 0; i < 7; ++i) CHECK((c.transitions().row(i).transpose() - w).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("one level is the static channel") {
    spec.levels = 1;
    CHECK(build_fading_model(spec).is_static());
  }
  SUBCASE("bad mixing") {
    spec.mixing = 0.0;
    CHECK_THROWS_AS(build_fading_model(spec), DomainError);
    spec.mixing = 1.2;
    CHECK_THROWS_AS(build_fading_model(spec), DomainError);
  }
}

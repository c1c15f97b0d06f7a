#include "doctest.h"

#include <cmath>

#include "hitlab/error.hpp"
#include "hitlab/hitting.hpp"

using namespace hitlab;

TEST_CASE("periodic orbit avoiding the target is censored") {
  const auto dbl = SystemSpec::doubling();
  const auto h = hitting_time(dbl, point_from_fraction(dbl, 1, 3), parse_observable("dist:0", 1), 0.05, 100);
  CHECK(h.censored);
  CHECK(h.tau == 100);
  CHECK(h.cap == 100);
}

TEST_CASE("hitting times are monotone along a decreasing ladder") {
  const auto cat = SystemSpec::cat();
  const auto f = parse_observable("dist:0.3,0.6", 2);
  const auto ladder = RadiusLadder::dyadic(2, 7);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto recs = hitting_times(cat, invariant_sample(cat, 8, i), f, ladder.radii(), 1'000'000, i);
    for (std::size_t k = 1; k < recs.size(); ++k) CHECK(recs[k].tau >= recs[k - 1].tau);
    // One pass equals separate single-radius searches.
    for (const auto& r : recs) {
      const auto single = hitting_time(cat, invariant_sample(cat, 8, i), f, r.radius, 1'000'000, i);
      CHECK(single.tau == r.tau);
      CHECK(single.censored == r.censored);
    }
  }
}

TEST_CASE("constant hitting time gives zero exponents") {
  const auto id = SystemSpec::identity(1);
  const auto e = estimate_R(id, point_from_fraction(id, 3, 8), parse_observable("dist:0.375", 1),
                            RadiusLadder::dyadic(2, 8), 10);
  CHECK(e.slope == 0.0);
  CHECK(e.R_upper == 0.0);
  CHECK(e.R_lower == 0.0);
}

TEST_CASE("exponent fit on synthetic records") {
  std::vector<HittingRecord> recs;
  for (int k = 3; k <= 12; ++k) {
    const double r = std::ldexp(1.0, -k);
    recs.push_back({0, r, static_cast<std::uint64_t>(std::llround(std::pow(2.0, 2.0 * k))), false, 1ULL << 40, 0});
  }
  const auto e = fit_exponent(recs);
  CHECK(e.slope == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(e.censor_fraction == 0.0);
  const auto w = fit_exponent(recs, {4});
  CHECK(w.window_width == 4);
  CHECK(w.R_upper == doctest::Approx(2.0).epsilon(1e-6));

  for (auto& r : recs) r.censored = true;
  recs[0].censored = false;
  CHECK_THROWS_AS(fit_exponent(recs), Error);
}

TEST_CASE("Borel-Cantelli counter") {
  const auto id = SystemSpec::identity(1);
  const auto f = parse_observable("dist:0.375", 1);
  const auto s = bc_counter_series(id, point_from_fraction(id, 3, 8), f, 0.5, 1000, 1.0, MeasureSource{});
  CHECK(s.back().k == 1000);
  CHECK(s.back().Z == 1001);

  const auto dbl = SystemSpec::doubling();
  const std::vector<std::uint64_t> marks{4};
  const auto t = bc_counter_series(dbl, invariant_sample(dbl, 5, 0), f, 0.5, 1000, 1.0, MeasureSource{}, marks);
  CHECK(t.front().k == 4);
  CHECK(t.front().EZ == doctest::Approx(5.0));  // r_i >= 1/2 covers the circle for i <= 4
  CHECK(bc_radius(0, 0.5) == 1.0);
  CHECK(bc_radius(4, 0.5) == 0.5);

  CHECK_THROWS_AS(bc_counter_series(dbl, invariant_sample(dbl, 5, 0), f, 1.5, 1000, 1.0, MeasureSource{}), Error);
  CHECK_THROWS_AS(bc_counter_series(dbl, invariant_sample(dbl, 5, 0), f, 0.5, 10, 1.0, MeasureSource{}), Error);
}

TEST_CASE("default cap scales with the smallest measure") {
  CHECK(default_cap(0.01) == 5000);
  CHECK(default_cap(1.0) == 50);
}

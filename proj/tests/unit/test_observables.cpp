#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hitlab/error.hpp"
#include "hitlab/observables.hpp"

using namespace hitlab;

TEST_CASE("distance observables use the quotient metric") {
  const std::vector<double> x{0.9};
  CHECK(parse_observable("dist:0", 1).evaluate(x) == doctest::Approx(0.1));
  const std::vector<double> y{0.5, 0.93};
  CHECK(parse_observable("projdist:1:0.5", 2).evaluate(y) == 0.0);
  const std::vector<double> x0{0.2, 0.7};
  CHECK(Observable::pushforward_from(ObservationMap::constant({0.5}, 2), x0).evaluate(y) == 0.0);
}

TEST_CASE("mollifier interpolates between nested indicators") {
  CHECK(mollifier_value(0.1, 0.2, 0.1) == 1.0);
  CHECK(mollifier_value(0.15, 0.2, 0.1) == doctest::Approx(0.5));
  CHECK(mollifier_value(0.25, 0.2, 0.1) == 0.0);
  // Bracketed by the two indicators everywhere.
  for (double v = 0.0; v < 0.3; v += 0.001) {
    const double m = mollifier_value(v, 0.2, 0.1);
    CHECK(m >= (v <= 0.1 ? 1.0 : 0.0));
    CHECK(m <= (v <= 0.2 ? 1.0 : 0.0));
  }
}

TEST_CASE("closed-form measures") {
  const auto dbl = SystemSpec::doubling();
  const auto cat = SystemSpec::cat();
  CHECK(*closed_form_measure(dbl, parse_observable("dist:0.5", 1), 0.1) == doctest::Approx(0.2));
  CHECK(*closed_form_measure(cat, parse_observable("dist:0,0", 2), 0.1) == doctest::Approx(std::numbers::pi * 0.01));
  CHECK(*closed_form_measure(cat, parse_observable("projdist:1:0.5", 2), 0.1) == doctest::Approx(0.2));
  CHECK(*closed_form_measure(dbl, parse_observable("dist:0.5", 1), 0.7) == 1.0);
  CHECK_FALSE(closed_form_measure(parse_system("mp:0.5"), parse_observable("dist:0.5", 1), 0.1).has_value());
}

TEST_CASE("Monte Carlo measure agrees with an independent sample") {
  const auto cat = SystemSpec::cat();
  const auto fat = estimate_measure(parse_observable("fat:0.01:dist:0.3,0.3", 2), 0.05, cat, 3, 1000);
  CHECK(fat.value == doctest::Approx(std::numbers::pi * 0.06 * 0.06));
  CHECK(fat.half_width == 0.0);

  const auto mp = parse_system("mp:0.5");
  const auto f = parse_observable("dist:0.5", 1);
  const auto est = estimate_measure(f, 0.05, mp, 3, 200'000);
  const auto vals = sample_observable(f, mp, 4, 200'000);
  const double other = std::count_if(vals.begin(), vals.end(), [](double v) { return v <= 0.05; }) / 200'000.0;
  CHECK(est.half_width > 0.0);
  CHECK(std::fabs(est.value - other) <= 2.0 * est.half_width);
}

TEST_CASE("sublevel dimension from exact measures") {
  const auto ladder = RadiusLadder::dyadic(3, 12);
  const auto d1 = estimate_dimension(parse_observable("dist:0.5", 1), ladder, SystemSpec::doubling(), 1, 1000);
  CHECK(d1.exact);
  CHECK(d1.slope == doctest::Approx(1.0).epsilon(0.02));
  const auto d2 = estimate_dimension(parse_observable("dist:0.3,0.6", 2), ladder, SystemSpec::cat(), 1, 1000);
  CHECK(d2.slope == doctest::Approx(2.0).epsilon(0.025));
  CHECK(d2.d_upper >= d2.d_lower);
}

TEST_CASE("ladders enforce the gap condition") {
  CHECK_NOTHROW(RadiusLadder({0.5, 0.25, 0.125}));
  CHECK_THROWS_AS(RadiusLadder({0.5, 0.01}), Error);
  CHECK_THROWS_AS(RadiusLadder({0.5, 0.6}), Error);
  CHECK_THROWS_AS(RadiusLadder({0.5, -0.1}), Error);
  try {
    RadiusLadder({0.5, 0.01});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigInvalid);
    CHECK(e.where() == "ladder");
  }
  CHECK(RadiusLadder::dyadic(3, 5, 0.5).size() == 5);
}

TEST_CASE("too few usable rungs is a degenerate ladder") {
  const auto ladder = RadiusLadder::dyadic(3, 14);
  CHECK_THROWS_AS(estimate_dimension(parse_observable("dist:0.5", 1), ladder, parse_system("mp:0.5"), 1, 200),
                  Error);
}

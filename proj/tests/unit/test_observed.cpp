#include "doctest.h"

#include "hitlab/observed.hpp"
#include "hitlab/random.hpp"

using namespace hitlab;

TEST_CASE("observed hitting equals hitting of the pulled-back observable") {
  const auto cat = SystemSpec::cat();
  const std::vector<std::string> maps{"id", "proj:1", "proj:2", "smooth:twist", "linear:[[1,1]]"};
  std::size_t n = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto F = parse_observation_map(maps[i % maps.size()], 2);
    const auto x = invariant_sample(cat, 60, i);
    const auto x0 = invariant_sample(cat, 61, i).coords();
    const double r = 0.02 + 0.1 * unit_from_word(random_word(62, i));
    const auto a = observed_hitting_time(cat, x, x0, F, r, 2000, i);
    const auto b = hitting_time(cat, x, Observable::pushforward_from(F, x0), r, 2000, i);
    n += a.tau == b.tau && a.censored == b.censored;
  }
  CHECK(n == 1000);

  // Identity map against the ball observable.
  const auto x = invariant_sample(cat, 1, 0);
  const auto x0 = invariant_sample(cat, 2, 0).coords();
  CHECK(observed_hitting_time(cat, x, x0, ObservationMap::identity(2), 0.05, 100'000).tau ==
        hitting_time(cat, x, Observable::dist_to_point(x0), 0.05, 100'000).tau);
}

TEST_CASE("projection example on the cat map") {
  const auto cat = SystemSpec::cat();
  const std::vector<Fraction> half{{1, 2}, {1, 2}};
  const auto x = point_from_fractions(cat, half);
  const std::vector<double> x0{0.5, 0.1};
  const auto a = observed_hitting_time(cat, x, x0, parse_observation_map("proj:1", 2), 0.1, 1000);
  const auto b = hitting_time(cat, x, parse_observable("projdist:1:0.5", 2), 0.1, 1000);
  CHECK(a.tau == b.tau);
}

TEST_CASE("constant maps hit at the first step") {
  const auto cat = SystemSpec::cat();
  const std::vector<double> x0{0.1, 0.2};
  const auto h = observed_hitting_time(cat, invariant_sample(cat, 4, 0), x0, ObservationMap::constant({0.5}, 2), 1e-6, 100);
  CHECK(h.tau == 1);
  CHECK_FALSE(h.censored);
}

TEST_CASE("Jacobian rank") {
  const std::vector<double> x{0.3, 0.6};
  CHECK(jacobian_rank(parse_observation_map("linear:[[1,0],[2,0]]", 2), x).rank == 1);
  CHECK(jacobian_rank(parse_observation_map("id", 2), x).rank == 2);
  CHECK(jacobian_rank(parse_observation_map("const:0.5", 2), x).rank == 0);
  CHECK(jacobian_rank(parse_observation_map("smooth:graph", 2), x).rank == 1);
  const std::vector<double> crit{0.25, 0.6};
  CHECK(jacobian_rank(parse_observation_map("smooth:sine", 2), crit).rank == 0);
  CHECK_THROWS(jacobian_rank(parse_observation_map("id", 2), x, 0.5));
}

TEST_CASE("pushforward dimension") {
  const auto cat = SystemSpec::cat();
  const std::vector<double> x0{0.3, 0.6};
  const auto ladder = RadiusLadder::dyadic(2, 7);
  CHECK(pushforward_dimension(cat, parse_observation_map("id", 2), x0, ladder, 42, 200'000).slope ==
        doctest::Approx(2.0).epsilon(0.05));
  CHECK(pushforward_dimension(cat, parse_observation_map("proj:1", 2), x0, ladder, 42, 200'000).slope ==
        doctest::Approx(1.0).epsilon(0.05));
  CHECK(pushforward_dimension(cat, parse_observation_map("const:0.5", 2), x0, ladder, 42, 200'000).slope == 0.0);

  // The batched form reuses one sample and matches the per-point call.
  const auto F = parse_observation_map("proj:1", 2);
  const auto batch = pushforward_dimensions(cat, F, x0, ladder, 42, 200'000);
  const auto single = estimate_dimension(Observable::pushforward_from(F, x0), ladder, cat, 42, 200'000);
  CHECK(batch.at(0).slope == doctest::Approx(single.slope).epsilon(1e-12));
}

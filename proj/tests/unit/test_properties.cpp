// Randomized property checks across modules.
#include "doctest.h"

#include <cmath>

#include "hitlab/dynamics.hpp"
#include "hitlab/hitting.hpp"
#include "hitlab/observables.hpp"
#include "hitlab/parallel.hpp"
#include "hitlab/random.hpp"

using namespace hitlab;

TEST_CASE("Lebesgue maps preserve box frequencies") {
  for (const char* id : {"doubling", "cat", "rotation:golden"}) {
    CAPTURE(id);
    const auto sys = parse_system(id);
    const std::size_t n = 20'000;
    std::size_t before = 0, after = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto p = invariant_sample(sys, 77, i);
      before += p.coord(0) < 0.3;
      after += step(sys, p).coord(0) < 0.3;
    }
    const double se = std::sqrt(0.3 * 0.7 / n);
    CHECK(std::fabs(before / double(n) - 0.3) < 4 * se);
    CHECK(std::fabs(after / double(n) - 0.3) < 4 * se);
  }
}

TEST_CASE("toral maps reverse exactly from random points") {
  const auto sys = parse_system("toral:2,3,1,2");
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto p = invariant_sample(sys, 78, i);
    auto q = p;
    const auto steps = 1 + random_word(79, i) % 300;
    for (std::uint64_t k = 0; k < steps; ++k) q = step(sys, q);
    for (std::uint64_t k = 0; k < steps; ++k) q = step_inverse(sys, q);
    CHECK(q == p);
  }
}

TEST_CASE("sublevels nest: measure estimates are monotone in r") {
  const auto mp = parse_system("mp:0.5");
  const auto f = parse_observable("dist:0.4", 1);
  const std::vector<double> radii{0.2, 0.1, 0.05, 0.02, 0.01, 0.005};
  const auto m = estimate_measures(f, radii, mp, 3, 50'000);
  for (std::size_t k = 1; k < m.size(); ++k) CHECK(m[k].value <= m[k - 1].value);
}

TEST_CASE("worker count never changes results") {
  const auto cat = SystemSpec::cat();
  CHECK(sample_invariant_coords(cat, 5, 10'000, 1) == sample_invariant_coords(cat, 5, 10'000, 3));
  const auto f = parse_observable("dist:0.2,0.2", 2);
  const std::vector<double> radii{0.3, 0.1};
  const auto a = estimate_measures(f, radii, cat, 6, 20'000, {0.95, 4, 20.0, 1});
  const auto b = estimate_measures(f, radii, cat, 6, 20'000, {0.95, 4, 20.0, 3});
  for (std::size_t k = 0; k < radii.size(); ++k) CHECK(a[k].value == b[k].value);
}

TEST_CASE("hitting time is the first entry") {
  const auto dbl = SystemSpec::doubling();
  const auto f = parse_observable("dist:0.7", 1);
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto x = invariant_sample(dbl, 80, i);
    const auto h = hitting_time(dbl, x, f, 0.05, 10'000, i);
    REQUIRE_FALSE(h.censored);
    auto q = x;
    for (std::uint64_t n = 1; n < h.tau; ++n) {
      q = step(dbl, q);
      CHECK(f.evaluate(q) > 0.05);
    }
    CHECK(f.evaluate(step(dbl, q)) <= 0.05);
  }
}

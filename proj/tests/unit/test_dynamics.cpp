#include "doctest.h"

#include <cmath>

#include "hitlab/dynamics.hpp"
#include "hitlab/error.hpp"
#include "hitlab/random.hpp"

using namespace hitlab;

TEST_CASE("catalog maps act exactly on rational points") {
  const auto dbl = SystemSpec::doubling();
  CHECK(step(dbl, point_from_fraction(dbl, 3, 8)).coord(0) == 0.75);

  const auto cat = SystemSpec::cat();
  const std::vector<Fraction> half{{1, 2}, {1, 2}};
  const auto img = step(cat, point_from_fractions(cat, half)).coords();
  CHECK(img[0] == 0.5);
  CHECK(img[1] == 0.0);

  const auto rot = parse_system("rotation:0.25");
  CHECK(step(rot, point_from_fraction(rot, 7, 8)).coord(0) == 0.125);
}

TEST_CASE("doubling shifts the bit reservoir") {
  const auto dbl = SystemSpec::doubling();
  // 0.1011 -> 0.011
  CHECK(step(dbl, point_from_fraction(dbl, 11, 16)).coord(0) == 0.375);
  const auto p = invariant_sample(dbl, 9, 0);
  CHECK(orbit_window(dbl, p, 0) == p);
  CHECK(orbit_window(dbl, p, 3) == step(dbl, step(dbl, step(dbl, p))));
}

TEST_CASE("invertible maps reverse exactly") {
  for (const char* id : {"cat", "rotation:golden", "rotation:liouville", "toral:3,2,1,1"}) {
    CAPTURE(id);
    const auto sys = parse_system(id);
    const auto p = invariant_sample(sys, 4, 1);
    auto q = orbit_window(sys, p, 1000);
    for (int i = 0; i < 1000; ++i) q = step_inverse(sys, q);
    CHECK(q == p);
  }
}

TEST_CASE("orbit cursor agrees with repeated steps") {
  for (const char* id : {"doubling", "cat", "rotation:golden", "mp:0.5"}) {
    CAPTURE(id);
    const auto sys = parse_system(id);
    const auto p = start_points(sys, 3, 1).front();
    OrbitCursor cur(sys, p);
    auto q = p;
    for (int i = 0; i < 200; ++i) {
      cur.advance();
      q = step(sys, q);
    }
    CHECK(cur.steps() == 200);
    CHECK(cur.point() == q);
  }
}

TEST_CASE("fixed-point doubling refuses to run past its bit budget") {
  const auto sys = parse_system("doubling:fixed", 128);
  auto p = point_from_fraction(sys, 1, 3);
  CHECK_THROWS_AS(orbit_window(sys, p, 10'000), Error);
}

TEST_CASE("invariant samples look uniform") {
  const auto dbl = SystemSpec::doubling();
  const auto xs = sample_invariant_coords(dbl, 11, 1000);
  double s = 0;
  for (double x : xs) s += x;
  CHECK(s / 1000 == doctest::Approx(0.5).epsilon(0.06));

  const auto cat = SystemSpec::cat();
  const auto ys = sample_invariant_coords(cat, 12, 1000);
  int left = 0;
  for (int i = 0; i < 1000; ++i) left += ys[2 * i] < 0.5;
  CHECK(left >= 450);
  CHECK(left <= 550);
}

TEST_CASE("unknown system ids are rejected") {
  CHECK_THROWS_AS(parse_system("tent"), Error);
  CHECK_THROWS_AS(parse_system("mp:1.5"), Error);
  CHECK_THROWS_AS(parse_system("rotation:2"), Error);
}

TEST_CASE("counter streams are pure functions of key and index") {
  CHECK(random_word(derive_key(1, stream::points, 2), 5) == random_word(derive_key(1, stream::points, 2), 5));
  CHECK(derive_key(1, stream::points, 2) != derive_key(1, stream::points, 3));
  CHECK(derive_key(1, stream::points, 2) != derive_key(1, stream::invariant, 2));
  CHECK(sample_invariant(SystemSpec::cat(), 5, 10) == sample_invariant(SystemSpec::cat(), 5, 10));
}

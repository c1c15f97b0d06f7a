#include "doctest.h"

#include <limits>

#include "hitlab/error.hpp"
#include "hitlab/flow.hpp"

using namespace hitlab;

TEST_CASE("log grid") {
  const auto g = log_grid(1000, 10);
  CHECK(g.front() == 1);
  CHECK(g.back() == 1000);
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
  CHECK(log_grid(1, 20) == std::vector<std::uint64_t>{1});
}

TEST_CASE("running minimum equals the prefix minimum") {
  const auto cat = SystemSpec::cat();
  const auto pi = ObservationMap::identity(2);
  const auto x = invariant_sample(cat, 50, 0);
  const std::vector<double> p{0.25, 0.75};
  const auto grid = log_grid(2000, 10);
  const auto s = approach_series(cat, pi, x, p, grid);

  auto q = x;
  double best = std::numeric_limits<double>::infinity();
  std::size_t g = 0;
  for (std::uint64_t n = 1; n <= 2000; ++n) {
    q = step(cat, q);
    best = std::min(best, torus_distance(q.coords(), p));
    if (g < grid.size() && grid[g] == n) CHECK(s.d[g++] == best);
  }
  for (std::size_t i = 1; i < s.d.size(); ++i) CHECK(s.d[i] <= s.d[i - 1]);
  CHECK(s.exponent >= 0.0);

  const std::vector<std::uint64_t> one{1};
  CHECK(approach_series(cat, pi, x, p, one).d[0] == torus_distance(step(cat, x).coords(), p));
}

TEST_CASE("approach series preconditions") {
  const auto cat = SystemSpec::cat();
  const auto x = invariant_sample(cat, 1, 0);
  const std::vector<double> p{0.5, 0.5};
  const std::vector<std::uint64_t> bad{5, 3};
  CHECK_THROWS_AS(approach_series(cat, ObservationMap::identity(2), x, p, bad), Error);
  const std::vector<std::uint64_t> ok{1, 2};
  CHECK_THROWS_AS(approach_series(SystemSpec::doubling(), ObservationMap::identity(1), invariant_sample(SystemSpec::doubling(), 1, 0),
                                  std::vector<double>{0.5}, ok),
                  Error);
  CHECK_THROWS_AS(approach_series(cat, parse_observation_map("smooth:twist", 2), x, p, ok), Error);
}

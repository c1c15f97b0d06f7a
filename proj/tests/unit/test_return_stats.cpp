#include "doctest.h"

#include <cmath>

#include "hitlab/return_stats.hpp"

using namespace hitlab;

TEST_CASE("conditioned samples lie in the target") {
  const auto dbl = SystemSpec::doubling();
  const auto f = parse_observable("dist:0.5", 1);
  const auto pts = sample_conditioned(dbl, f, 0.1, 31, 10'000);
  double s = 0;
  for (const auto& p : pts) {
    CHECK(f.evaluate(p) <= 0.1);
    s += p.coord(0);
  }
  CHECK(s / pts.size() == doctest::Approx(0.5).epsilon(0.02));

  const auto mp = parse_system("mp:0.5");
  const auto g = parse_observable("dist:0.3", 1);
  const auto q = sample_conditioned(mp, g, 0.05, 33, 200);
  CHECK(q.size() == 200);
  for (const auto& p : q) CHECK(g.evaluate(p) <= 0.05);
}

TEST_CASE("return curve basics") {
  const auto dbl = SystemSpec::doubling();
  const auto f = parse_observable("dist:0.375", 1);
  const auto s = return_times(dbl, f, 1.0 / 256, 3, 2000);
  const auto c = return_curve(s, default_return_grid());
  CHECK(c.t.size() == 51);
  CHECK(c.g.front() == 1.0);
  for (std::size_t i = 1; i < c.g.size(); ++i) CHECK(c.g[i] <= c.g[i - 1]);
  CHECK(exp_law_distance(c) < 0.1);
  CHECK(kac_check(s).consistent);
}

TEST_CASE("exp-law distance on closed-form curves") {
  ReturnCurve c;
  c.t = default_return_grid();
  for (double t : c.t) {
    c.g.push_back(std::exp(-t));
    c.beyond_cap.push_back(false);
  }
  CHECK(exp_law_distance(c) == 0.0);
  for (auto& g : c.g) g = 1.0;
  CHECK(exp_law_distance(c) == doctest::Approx(1.0 - std::exp(-5.0)));
}

TEST_CASE("triviality indicator and its tie handling") {
  ReturnSample s;
  s.radius = 0.1;
  s.measure = {0.25, 0.0};
  s.cap = 1000;
  s.tau = {4, 8, 8, 12};
  s.censored = {false, false, false, false};
  // l / mu = 8: ties count in g(2) but not in the indicator.
  const auto t = triviality_indicator(s, 2.0);
  CHECK(t.value == doctest::Approx(0.25));
  CHECK(t.ties == 2);
  const std::vector<double> grid{2.0};
  CHECK(return_curve(s, grid).g[0] == doctest::Approx(0.75));
  CHECK(triviality_indicator(s, 1e-9).value == 1.0);
}

TEST_CASE("golden rotation returns take at most three values") {
  const auto rot = parse_system("rotation:golden");
  const auto s = return_times(rot, parse_observable("dist:0.375", 1), 1.0 / 1024, 4, 2000);
  CHECK(distinct_return_times(s).size() <= 3);
  CHECK(jump_clusters(return_curve(s, default_return_grid())) <= 3);
}

#include "doctest.h"

#include <cmath>

#include "hitlab/error.hpp"
#include "hitlab/mixing.hpp"

using namespace hitlab;

namespace {

CorrelationSeries synthetic(double (*value)(double), double hw = 1e-12) {
  CorrelationSeries s;
  for (std::uint64_t n = 1; n <= 20; ++n) {
    s.lags.push_back(n);
    s.values.push_back(value(static_cast<double>(n)));
    s.covariance.push_back(s.values.back());
    s.half_widths.push_back(hw);
  }
  s.phi_norm = s.psi_norm = {1.0, 1.0};
  s.samples = 1000;
  return s;
}

}  // namespace

TEST_CASE("decay fits recover synthetic rates") {
  const auto e = fit_decay(synthetic([](double n) { return std::pow(2.0, -n); }));
  CHECK(e.decay_class == DecayClass::Exponential);
  CHECK(e.rate == doctest::Approx(std::log(2.0)).epsilon(0.05));
  CHECK(e.envelope(5) >= std::pow(2.0, -5) * (1 - 1e-9));

  const auto p = fit_decay(synthetic([](double n) { return std::pow(n, -2.0); }));
  CHECK(p.decay_class == DecayClass::Polynomial);
  CHECK(p.rate == doctest::Approx(2.0).epsilon(0.05));

  const auto none = fit_decay(synthetic([](double) { return 1e-4; }, 1e-3));
  CHECK(none.decay_class == DecayClass::Inconclusive);
  CHECK_THROWS_AS(none.envelope(3), Error);
}

TEST_CASE("test functions and their norms") {
  const auto r = TestFunction::ramp(0, 4.0);
  const std::vector<double> a{0.375}, b{0.875}, top{0.75};
  CHECK(r.evaluate(a) == doctest::Approx(0.5));
  CHECK(r.evaluate(top) == doctest::Approx(1.0));
  CHECK(r.evaluate(b) == doctest::Approx(0.5));
  CHECK(r.norm().lip == 4.0);
  CHECK(parse_test_function("cos:1:2", 1).label() == "cos:1:2");
  CHECK(TestFunction::constant(0.3).norm().lip == 0.0);
  CHECK_THROWS_AS(TestFunction::ramp(0, 0.5), Error);
}

TEST_CASE("correlation estimates") {
  const auto dbl = SystemSpec::doubling();
  const std::vector<std::uint64_t> lag{1};
  const auto s = estimate_correlation(dbl, TestFunction::cosine(0, 1), TestFunction::cosine(0, 1), lag, 21, 100'000);
  CHECK(s.values[0] <= s.half_widths[0]);

  const std::vector<std::uint64_t> lags{1, 2, 3};
  const auto c = estimate_correlation(SystemSpec::cat(), TestFunction::cosine(0, 1), TestFunction::constant(0.3), lags,
                                      22, 10'000);
  for (double v : c.covariance) CHECK(std::fabs(v) <= 1e-12);

  const std::vector<std::uint64_t> bad{2, 1};
  CHECK_THROWS_AS(estimate_correlation(dbl, TestFunction::cosine(0, 1), TestFunction::cosine(0, 1), bad, 1, 10'000),
                  Error);
  CHECK_THROWS_AS(estimate_correlation(dbl, TestFunction::cosine(0, 1), TestFunction::cosine(0, 1), lag, 1, 10), Error);
}

TEST_CASE("ramp correlations under doubling decay like 2^-n") {
  const auto fit = reference_decay(SystemSpec::doubling(), 5, 1'000'000);
  CHECK(fit.decay_class == DecayClass::Exponential);
  CHECK(fit.rate > 0.5);
  CHECK(fit.rate < 0.9);
}

TEST_CASE("intersection bound on a few doubling pairs") {
  const auto dbl = SystemSpec::doubling();
  const auto decay = reference_decay(dbl, 6, 1'000'000);
  const auto ladder = RadiusLadder::dyadic(1, 12);
  const auto f = parse_observable("dist:0.375", 1);
  for (auto [k, j] : std::vector<std::pair<std::size_t, std::size_t>>{{8, 2}, {10, 4}, {11, 1}}) {
    CAPTURE(k);
    CAPTURE(j);
    const auto c = intersection_bound_check(dbl, f, ladder, k, j, 7, 200'000, decay);
    CHECK(c.holds);
    CHECK(c.rhs >= c.product);
  }
  CHECK_THROWS_AS(intersection_bound_check(dbl, f, ladder, 3, 3, 7, 1000, decay), Error);
  DecayFit none;
  CHECK_THROWS_AS(intersection_bound_check(dbl, f, ladder, 8, 2, 7, 1000, none), Error);
}

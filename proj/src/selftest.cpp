#include <cmath>
#include <functional>
#include <numbers>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "hitlab/error.hpp"
#include "hitlab/flow.hpp"
#include "hitlab/harness.hpp"
#include "hitlab/hitting.hpp"
#include "hitlab/mixing.hpp"
#include "hitlab/observed.hpp"
#include "hitlab/random.hpp"
#include "hitlab/return_stats.hpp"
#include "hitlab/stats.hpp"

namespace hitlab {

namespace {

using Check = std::function<std::pair<bool, std::string>()>;

std::pair<bool, std::string> near(double got, double want, double tol) {
  return {std::fabs(got - want) <= tol, fmt::format("got {:.6g}, want {:.6g} +- {:.2g}", got, want, tol)};
}

std::pair<bool, std::string> coords_near(const PhasePoint& p, std::vector<double> want) {
  const auto got = p.coords();
  bool ok = got.size() == want.size();
  for (std::size_t i = 0; ok && i < got.size(); ++i) ok = std::fabs(got[i] - want[i]) < 1e-15;
  return {ok, fmt::format("got ({}), want ({})", fmt::join(got, ", "), fmt::join(want, ", "))};
}

CorrelationSeries synthetic(std::function<double(double)> value) {
  CorrelationSeries s;
  for (std::uint64_t n = 1; n <= 20; ++n) {
    s.lags.push_back(n);
    s.values.push_back(value(static_cast<double>(n)));
    s.covariance.push_back(s.values.back());
    s.half_widths.push_back(1e-12);
  }
  s.phi_norm = s.psi_norm = {1.0, 1.0};
  s.samples = 1000;
  return s;
}

ReturnCurve curve_of(std::function<double(double)> g) {
  ReturnCurve c;
  c.t = default_return_grid();
  for (double t : c.t) {
    c.g.push_back(g(t));
    c.beyond_cap.push_back(false);
  }
  return c;
}

std::string dimension_config(const std::string& extra = {}) {
  return "[experiment]\nkind = dimension\nsystem = doubling\nseed = 7\n"
         "[dimension]\nobservable = dist:0.5\nladder = dyadic:3:12\nsamples = 1000\n" + extra;
}

std::vector<std::pair<std::string, Check>> cases() {
  const auto doubling = SystemSpec::doubling();
  const auto cat = SystemSpec::cat();
  const double pi = std::numbers::pi;
  std::vector<std::pair<std::string, Check>> c;

  // Dynamics.
  c.emplace_back("doubling maps 3/8 to 3/4", [=] { return coords_near(step(doubling, point_from_fraction(doubling, 3, 8)), {0.75}); });
  c.emplace_back("cat maps (1/2,1/2) to (1/2,0)", [=] {
    const Fraction h{1, 2};
    const std::vector<Fraction> x{h, h};
    return coords_near(step(cat, point_from_fractions(cat, x)), {0.5, 0.0});
  });
  c.emplace_back("rotation by 1/4 maps 7/8 to 1/8", [] {
    const auto rot = parse_system("rotation:0.25");
    return coords_near(step(rot, point_from_fraction(rot, 7, 8)), {0.125});
  });
  c.emplace_back("doubling shifts leading bits 1011 to 011", [=] {
    return coords_near(step(doubling, point_from_fraction(doubling, 11, 16)), {0.375});
  });
  c.emplace_back("orbit window with n = 0 is the identity", [=] {
    const auto p = invariant_sample(cat, 3, 0);
    return std::pair{orbit_window(cat, p, 0) == p, std::string("T^0 p == p")};
  });
  c.emplace_back("doubling sample mean in [0.47, 0.53]", [=] {
    const auto xs = sample_invariant_coords(doubling, 11, 1000);
    const double m = mean(xs);
    return std::pair{m >= 0.47 && m <= 0.53, fmt::format("mean {:.4f}", m)};
  });
  c.emplace_back("cat sample half-torus fraction in [0.45, 0.55]", [=] {
    const auto xs = sample_invariant_coords(cat, 12, 1000);
    std::size_t left = 0;
    for (std::size_t i = 0; i < 1000; ++i) left += xs[2 * i] < 0.5;
    const double f = left / 1000.0;
    return std::pair{f >= 0.45 && f <= 0.55, fmt::format("fraction {:.3f}", f)};
  });

  // Observables.
  c.emplace_back("circle distance from 0.9 to 0 is 0.1", [] {
    const std::vector<double> x{0.9};
    return near(parse_observable("dist:0", 1).evaluate(x), 0.1, 1e-15);
  });
  c.emplace_back("projected distance ignores the second coordinate", [] {
    const std::vector<double> x{0.5, 0.93};
    return near(parse_observable("projdist:1:0.5", 2).evaluate(x), 0.0, 0.0);
  });
  c.emplace_back("pushforward through a constant map is 0", [] {
    const std::vector<double> x0{0.2, 0.7}, x{0.9, 0.1};
    const auto f = Observable::pushforward_from(ObservationMap::constant({0.5}, 2), x0);
    return near(f.evaluate(x), 0.0, 0.0);
  });
  c.emplace_back("mollifier on the inner boundary is 1", [] { return near(mollifier_value(0.1, 0.2, 0.1), 1.0, 0.0); });
  c.emplace_back("mollifier interpolates to 0.5", [] { return near(mollifier_value(0.15, 0.2, 0.1), 0.5, 1e-12); });
  c.emplace_back("mollifier vanishes outside its support", [] { return near(mollifier_value(0.25, 0.2, 0.1), 0.0, 0.0); });
  c.emplace_back("interval measure 0.2", [=] {
    return near(closed_form_measure(doubling, parse_observable("dist:0.5", 1), 0.1).value_or(-1), 0.2, 1e-15);
  });
  c.emplace_back("disc measure pi/100", [=] {
    return near(closed_form_measure(cat, parse_observable("dist:0,0", 2), 0.1).value_or(-1), pi * 0.01, 1e-15);
  });
  c.emplace_back("circle sublevel dimension 1 +- 0.02", [=] {
    const auto d = estimate_dimension(parse_observable("dist:0.5", 1), RadiusLadder::dyadic(3, 12), doubling, 1, 1000);
    return near(d.slope, 1.0, 0.02);
  });
  c.emplace_back("torus sublevel dimension 2 +- 0.05", [=] {
    const auto d = estimate_dimension(parse_observable("dist:0.3,0.6", 2), RadiusLadder::dyadic(3, 12), cat, 1, 1000);
    return near(d.slope, 2.0, 0.05);
  });

  // Hitting.
  c.emplace_back("period-2 orbit of 1/3 is censored at 100", [=] {
    const auto h = hitting_time(doubling, point_from_fraction(doubling, 1, 3), parse_observable("dist:0", 1), 0.05, 100);
    return std::pair{h.censored && h.tau == 100, fmt::format("tau {} censored {}", h.tau, h.censored)};
  });
  c.emplace_back("fixed target hit at step 1 gives zero slopes", [] {
    const auto id = SystemSpec::identity(1);
    const auto x = point_from_fraction(id, 3, 8);
    const auto e = estimate_R(id, x, parse_observable("dist:0.375", 1), RadiusLadder::dyadic(2, 8), 10);
    bool ones = true;
    for (const auto& r : e.records) ones = ones && r.tau == 1;
    return std::pair{ones && e.slope == 0.0 && e.R_upper == 0.0 && e.R_lower == 0.0,
                     fmt::format("slope {} R_upper {} R_lower {}", e.slope, e.R_upper, e.R_lower)};
  });
  c.emplace_back("identity orbit counts Z_k = k + 1", [] {
    const auto id = SystemSpec::identity(1);
    const auto s = bc_counter_series(id, point_from_fraction(id, 3, 8), parse_observable("dist:0.375", 1), 0.5, 1000,
                                     1.0, MeasureSource{});
    return std::pair{s.back().Z == 1001, fmt::format("Z_1000 = {}", s.back().Z)};
  });
  c.emplace_back("E(Z_4) for beta = 1/2", [=] {
    const std::vector<std::uint64_t> marks{4};
    const auto s = bc_counter_series(doubling, invariant_sample(doubling, 5, 0), parse_observable("dist:0.375", 1), 0.5,
                                     1000, 1.0, MeasureSource{}, marks);
    // r_i = i^-1/2 >= 1/2 for i <= 4, so every interval covers the circle.
    return near(s.front().EZ, 5.0, 1e-12);
  });

  // Mixing.
  c.emplace_back("orthogonal cosines have zero correlation", [=] {
    const std::vector<std::uint64_t> lag{1};
    const auto s = estimate_correlation(doubling, TestFunction::cosine(0, 1), TestFunction::cosine(0, 1), lag, 21, 100'000);
    return std::pair{s.values[0] <= s.half_widths[0], fmt::format("|cov| {:.3g} hw {:.3g}", s.values[0], s.half_widths[0])};
  });
  c.emplace_back("covariance with a constant is 0", [=] {
    const std::vector<std::uint64_t> lags{1, 2, 3};
    const auto s = estimate_correlation(cat, TestFunction::cosine(0, 1), TestFunction::constant(0.3), lags, 22, 10'000);
    double worst = 0.0;
    for (double v : s.covariance) worst = std::max(worst, std::fabs(v));
    return std::pair{worst <= 1e-12, fmt::format("max |cov| {:.3g}", worst)};
  });
  c.emplace_back("2^-n fits exponential with rate ln 2", [] {
    const auto f = fit_decay(synthetic([](double n) { return std::pow(2.0, -n); }));
    return std::pair{f.decay_class == DecayClass::Exponential && std::fabs(f.rate / std::log(2.0) - 1) <= 0.05,
                     fmt::format("{} rate {:.4f}", to_string(f.decay_class), f.rate)};
  });
  c.emplace_back("n^-2 fits polynomial with exponent 2", [] {
    const auto f = fit_decay(synthetic([](double n) { return std::pow(n, -2.0); }));
    return std::pair{f.decay_class == DecayClass::Polynomial && std::fabs(f.rate / 2.0 - 1) <= 0.05,
                     fmt::format("{} rate {:.4f}", to_string(f.decay_class), f.rate)};
  });
  c.emplace_back("noise-level series is inconclusive", [] {
    auto s = synthetic([](double) { return 1e-4; });
    for (auto& h : s.half_widths) h = 1e-3;
    const auto f = fit_decay(s);
    return std::pair{f.decay_class == DecayClass::Inconclusive, to_string(f.decay_class)};
  });

  // Return statistics.
  c.emplace_back("conditioned interval sample mean in [0.49, 0.51]", [=] {
    const auto pts = sample_conditioned(doubling, parse_observable("dist:0.5", 1), 0.1, 31, 10'000);
    double sum = 0;
    for (const auto& p : pts) sum += p.coord(0);
    const double m = sum / pts.size();
    return std::pair{m >= 0.49 && m <= 0.51, fmt::format("mean {:.4f}", m)};
  });
  c.emplace_back("conditioned disc samples lie in the target", [=] {
    const auto f = parse_observable("dist:0.2,0.7", 2);
    const auto pts = sample_conditioned(cat, f, 0.05, 32, 2000);
    bool ok = true;
    for (const auto& p : pts) ok = ok && f.evaluate(p) <= 0.05;
    return std::pair{ok, std::string("all f <= r")};
  });
  c.emplace_back("rejection samples for MP lie in the target", [] {
    const auto mp = parse_system("mp:0.5");
    const auto f = parse_observable("dist:0.3", 1);
    const auto pts = sample_conditioned(mp, f, 0.05, 33, 200);
    bool ok = pts.size() == 200;
    for (const auto& p : pts) ok = ok && f.evaluate(p) <= 0.05;
    return std::pair{ok, fmt::format("{} samples", pts.size())};
  });
  c.emplace_back("return curve starts at 1", [=] {
    const auto s = return_times(doubling, parse_observable("dist:0.375", 1), 1.0 / 64, 34, 500);
    const auto cv = return_curve(s, default_return_grid());
    return near(cv.g.front(), 1.0, 0.0);
  });
  c.emplace_back("exponential curve has distance 0", [] {
    return near(exp_law_distance(curve_of([](double t) { return std::exp(-t); })), 0.0, 0.0);
  });
  c.emplace_back("constant curve has distance 1 - e^-5", [] {
    return near(exp_law_distance(curve_of([](double) { return 1.0; })), 1.0 - std::exp(-5.0), 1e-15);
  });
  c.emplace_back("triviality at l = 20 within 1/20 + 3 hw", [=] {
    const auto t = triviality_indicator(doubling, parse_observable("dist:0.375", 1), 1.0 / 128, 20.0, 35, 2000);
    return std::pair{t.value <= 0.05 + 3 * t.half_width, fmt::format("value {:.4f} hw {:.4f}", t.value, t.half_width)};
  });
  c.emplace_back("triviality as l -> 0 is 1", [=] {
    const auto t = triviality_indicator(doubling, parse_observable("dist:0.375", 1), 1.0 / 128, 1e-9, 35, 2000);
    return near(t.value, 1.0, 0.0);
  });

  // Observed systems.
  c.emplace_back("constant map hits at step 1", [=] {
    const std::vector<double> x0{0.1, 0.2};
    const auto h = observed_hitting_time(cat, invariant_sample(cat, 4, 0), x0, ObservationMap::constant({0.5}, 2), 1e-6, 100);
    return std::pair{h.tau == 1 && !h.censored, fmt::format("tau {}", h.tau)};
  });
  c.emplace_back("identity observation equals the ball hitting time", [=] {
    bool ok = true;
    for (std::uint64_t i = 0; i < 20; ++i) {
      const auto x = invariant_sample(cat, 40, i);
      const auto x0 = invariant_sample(cat, 41, i).coords();
      const auto a = observed_hitting_time(cat, x, x0, ObservationMap::identity(2), 0.05, 5000, i);
      const auto b = hitting_time(cat, x, Observable::dist_to_point(x0), 0.05, 5000, i);
      ok = ok && a.tau == b.tau && a.censored == b.censored;
    }
    return std::pair{ok, std::string("20 inputs")};
  });
  for (const auto& [map, want] : std::vector<std::pair<std::string, double>>{{"id", 2.0}, {"proj:1", 1.0}, {"const:0.5", 0.0}}) {
    c.emplace_back(fmt::format("pushforward dimension of {} is {}", map, want), [=] {
      const std::vector<double> x0{0.3, 0.6};
      const auto d = pushforward_dimension(cat, parse_observation_map(map, 2), x0, RadiusLadder::dyadic(2, 7), 42, 200'000);
      return near(d.slope, want, 0.1);
    });
  }
  for (const auto& [map, want] : std::vector<std::pair<std::string, std::size_t>>{
           {"linear:[[1,0],[2,0]]", 1}, {"id", 2}, {"const:0.5", 0}}) {
    c.emplace_back(fmt::format("rank of {} is {}", map, want), [=] {
      const std::vector<double> x{0.3, 0.6};
      const auto r = jacobian_rank(parse_observation_map(map, 2), x);
      return std::pair{r.rank == want, fmt::format("rank {}", r.rank)};
    });
  }

  // Flow analogue.
  c.emplace_back("single grid point is the first distance", [=] {
    const auto x = invariant_sample(cat, 50, 0);
    const std::vector<double> p{0.25, 0.75};
    const std::vector<std::uint64_t> grid{1};
    const auto s = approach_series(cat, ObservationMap::identity(2), x, p, grid);
    return near(s.d[0], torus_distance(step(cat, x).coords(), p), 0.0);
  });

  // Harness.
  c.emplace_back("dimension run matches the estimator", [=] {
    RunOptions o;
    o.workers = 1;
    const auto r = run(parse_config(dimension_config()), o);
    const auto d = estimate_dimension(parse_observable("dist:0.5", 1), RadiusLadder::dyadic(3, 12), doubling,
                                      derive_key(7, stream::invariant, 0), 1000);
    return std::pair{r.document["summary"]["dimension"]["slope"].get<double>() == d.slope, std::string("slope equal")};
  });
  c.emplace_back("repeated runs give identical data", [=] {
    const auto cfg = parse_config(dimension_config());
    RunOptions o;
    o.workers = 1;
    const auto a = run(cfg, o).document["data"].dump();
    const auto b = run(cfg, o).document["data"].dump();
    return std::pair{a == b, std::string("data sections compared")};
  });
  c.emplace_back("ladder gap violation names the ladder field", [] {
    try {
      run(parse_config("[experiment]\nkind = dimension\nsystem = doubling\nseed = 1\n"
                       "[dimension]\nobservable = dist:0.5\nladder = 0.5,0.01,0.005,0.001\n"));
    } catch (const Error& e) {
      return std::pair{e.code() == ErrorCode::ConfigInvalid && e.where() == "dimension.ladder", e.where()};
    }
    return std::pair{false, std::string("no error")};
  });
  c.emplace_back("empty report input is rejected", [] {
    try {
      report({});
    } catch (const Error& e) {
      return std::pair{e.code() == ErrorCode::SchemaMismatch, std::string(e.what())};
    }
    return std::pair{false, std::string("no error")};
  });
  c.emplace_back("mixed schema versions are rejected", [] {
    try {
      report({Json{{"schema_version", 1}, {"kind", "dimension"}}, Json{{"schema_version", 0}, {"kind", "dimension"}}});
    } catch (const Error& e) {
      const std::string msg = e.what();
      return std::pair{e.code() == ErrorCode::SchemaMismatch && msg.find('0') != std::string::npos, msg};
    }
    return std::pair{false, std::string("no error")};
  });
  c.emplace_back("catalog lists ids, mixing classes and the MP caveat", [] {
    const auto text = catalog_listing();
    bool ok = true;
    for (const char* id : {"doubling", "cat", "rotation:golden", "rotation:liouville", "mp:", "mixing=", "caveat"}) {
      ok = ok && text.find(id) != std::string::npos;
    }
    return std::pair{ok, std::string("catalog text")};
  });
  return c;
}

}  // namespace

std::vector<SelfTestCase> selftest() {
  std::vector<SelfTestCase> out;
  for (auto& [name, check] : cases()) {
    SelfTestCase tc{name, false, {}};
    try {
      std::tie(tc.passed, tc.detail) = check();
    } catch (const std::exception& e) {
      tc.detail = fmt::format("threw: {}", e.what());
    }
    out.push_back(std::move(tc));
  }
  return out;
}

}  // namespace hitlab

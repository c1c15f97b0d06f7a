#include "hitlab/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "hitlab/error.hpp"
#include "hitlab/parallel.hpp"
#include "hitlab/random.hpp"
#include "hitlab/stats.hpp"
#include "text.hpp"

namespace hitlab {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); }

// Invariant draws addressable by index. Lebesgue points are built on demand;
// the sequential Manneville-Pomeau sampler is materialized once.
class PointSource {
 public:
  PointSource(const SystemSpec& system, std::uint64_t seed, std::size_t count)
      : system_(system), seed_(seed) {
    if (!system.lebesgue()) cached_ = sample_invariant(system, seed, count);
  }
  PhasePoint operator()(std::size_t i) const {
    return cached_.empty() ? invariant_sample(system_, seed_, i) : cached_[i];
  }

 private:
  const SystemSpec& system_;
  std::uint64_t seed_;
  std::vector<PhasePoint> cached_;
};

// Calls visit(b, a) per sample, where b = psi(x) and a[l] = phi(T^{lag_l} x).
template <class Visit>
void walk_samples(const SystemSpec& system, const PointSource& points, const TestFunction& phi,
                  const TestFunction& psi, std::span<const std::uint64_t> lags,
                  std::size_t begin, std::size_t end, std::vector<double>& a, Visit&& visit) {
  for (std::size_t i = begin; i < end; ++i) {
    OrbitCursor cursor(system, points(i));
    const double b = psi.evaluate(cursor.coords());
    for (std::size_t l = 0; l < lags.size(); ++l) {
      while (cursor.steps() < lags[l]) cursor.advance();
      a[l] = phi.evaluate(cursor.coords());
    }
    visit(b, a);
  }
}

}  // namespace

TestFunction::TestFunction(Rule rule) : rule_(std::move(rule)) {}

TestFunction TestFunction::observable(Observable f) {
  TestFunction t(FromObservable{std::make_shared<const Observable>(std::move(f))});
  const auto& obs = *std::get<FromObservable>(t.rule_).f;
  t.label_ = obs.label();
  t.norm_ = {obs.sup_bound(), obs.lipschitz()};
  return t;
}

TestFunction TestFunction::cosine(std::size_t coord, int freq) {
  TestFunction t(Cosine{coord, freq});
  t.label_ = fmt::format("cos:{}:{}", coord + 1, freq);
  t.norm_ = {1.0, 2.0 * std::numbers::pi * std::abs(freq)};
  return t;
}

TestFunction TestFunction::ramp(std::size_t coord, double steepness) {
  if (!(steepness > 1.0)) invalid("ramp steepness must exceed 1");
  TestFunction t(Ramp{coord, steepness});
  t.label_ = fmt::format("ramp:{}:{}", coord + 1, steepness);
  t.norm_ = {1.0, steepness};
  return t;
}

TestFunction TestFunction::constant(double value) {
  TestFunction t(Constant{value});
  t.label_ = fmt::format("const:{}", value);
  t.norm_ = {std::fabs(value), 0.0};
  return t;
}

double TestFunction::evaluate(std::span<const double> x) const {
  return std::visit(
      [&](const auto& r) -> double {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, FromObservable>) {
          return r.f->evaluate(x);
        } else if constexpr (std::is_same_v<R, Cosine>) {
          return std::cos(2.0 * std::numbers::pi * r.freq * x[r.coord]);
        } else if constexpr (std::is_same_v<R, Ramp>) {
          const double top = 1.0 - 1.0 / r.steepness;
          const double v = x[r.coord];
          return v <= top ? v / top : (1.0 - v) * r.steepness;
        } else {
          return r.value;
        }
      },
      rule_);
}

TestFunction parse_test_function(std::string_view spec, std::size_t domain_dim) {
  spec = text::trim(spec);
  auto coord_and_value = [&](std::string_view rest, std::string_view what) {
    const auto parts = text::split(rest, ':');
    if (parts.size() != 2) invalid(fmt::format("'{}' needs <coord>:<{}>", spec, what));
    const auto coords = text::to_coords(parts[0], domain_dim);
    if (coords.size() != 1) invalid(fmt::format("'{}' takes a single coordinate", spec));
    return std::pair{coords[0], text::to_double(parts[1], what)};
  };
  if (spec.starts_with("cos:")) {
    const auto [c, freq] = coord_and_value(spec.substr(4), "frequency");
    if (freq != std::round(freq)) invalid(fmt::format("'{}' needs an integer frequency", spec));
    return TestFunction::cosine(c, static_cast<int>(freq));
  }
  if (spec.starts_with("ramp:")) {
    const auto [c, steep] = coord_and_value(spec.substr(5), "steepness");
    return TestFunction::ramp(c, steep);
  }
  if (spec.starts_with("const:")) return TestFunction::constant(text::to_double(spec.substr(6), "constant"));
  return TestFunction::observable(parse_observable(spec, domain_dim));
}

CorrelationSeries estimate_correlation(const SystemSpec& system, const TestFunction& phi,
                                       const TestFunction& psi, std::span<const std::uint64_t> lags,
                                       std::uint64_t seed, std::size_t samples,
                                       const CorrelationOptions& options) {
  if (samples < 1000) invalid("correlation estimates need at least 1000 samples");
  if (lags.empty()) invalid("correlation estimates need at least one lag");
  for (std::size_t l = 1; l < lags.size(); ++l) {
    if (lags[l] <= lags[l - 1]) invalid("lags must strictly increase");
  }
  const std::size_t L = lags.size();
  const std::uint64_t point_seed = derive_key(seed, stream::correlation, 0);
  const PointSource points(system, point_seed, samples);
  const std::size_t chunks = chunk_count(samples);
  auto chunk_range = [&](std::size_t c) {
    return std::pair{c * kTallyChunk, std::min(samples, (c + 1) * kTallyChunk)};
  };

  // Pass 1: means. Pass 2: centered products, so the variance of the product
  // is computed without cancellation.
  std::vector<std::vector<double>> sum_a(chunks, std::vector<double>(L, 0.0));
  std::vector<double> sum_b(chunks, 0.0);
  parallel_for(chunks, options.workers, [&](std::size_t c) {
    std::vector<double> a(L);
    const auto [begin, end] = chunk_range(c);
    walk_samples(system, points, phi, psi, lags, begin, end, a, [&](double b, const std::vector<double>& av) {
      sum_b[c] += b;
      for (std::size_t l = 0; l < L; ++l) sum_a[c][l] += av[l];
    });
  });
  const double n = static_cast<double>(samples);
  double mean_b = 0.0;
  std::vector<double> mean_a(L, 0.0);
  for (std::size_t c = 0; c < chunks; ++c) {
    mean_b += sum_b[c];
    for (std::size_t l = 0; l < L; ++l) mean_a[l] += sum_a[c][l];
  }
  mean_b /= n;
  for (auto& m : mean_a) m /= n;

  std::vector<std::vector<double>> sum_u(chunks, std::vector<double>(L, 0.0));
  std::vector<std::vector<double>> sum_uu(chunks, std::vector<double>(L, 0.0));
  parallel_for(chunks, options.workers, [&](std::size_t c) {
    std::vector<double> a(L);
    const auto [begin, end] = chunk_range(c);
    walk_samples(system, points, phi, psi, lags, begin, end, a, [&](double b, const std::vector<double>& av) {
      for (std::size_t l = 0; l < L; ++l) {
        const double u = (av[l] - mean_a[l]) * (b - mean_b);
        sum_u[c][l] += u;
        sum_uu[c][l] += u * u;
      }
    });
  });

  CorrelationSeries out;
  out.lags.assign(lags.begin(), lags.end());
  out.phi_norm = phi.norm();
  out.psi_norm = psi.norm();
  out.samples = samples;
  const double z = z_for_confidence(options.confidence);
  for (std::size_t l = 0; l < L; ++l) {
    double su = 0.0, suu = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) {
      su += sum_u[c][l];
      suu += sum_uu[c][l];
    }
    const double cov = su / n;
    const double var_u = std::max(0.0, (suu - n * cov * cov) / (n - 1.0));
    out.covariance.push_back(cov);
    out.values.push_back(std::fabs(cov));
    out.half_widths.push_back(z * std::sqrt(var_u / n));
  }
  return out;
}

std::string to_string(DecayClass c) {
  switch (c) {
    case DecayClass::Exponential: return "exponential";
    case DecayClass::Polynomial: return "polynomial";
    case DecayClass::Inconclusive: return "inconclusive";
  }
  return "?";
}

double DecayFit::envelope(double n) const {
  switch (decay_class) {
    case DecayClass::Exponential: return std::exp(log_prefactor - rate * n + max_abs_residual);
    case DecayClass::Polynomial: return std::exp(log_prefactor - rate * std::log(n) + max_abs_residual);
    case DecayClass::Inconclusive: break;
  }
  throw Error(ErrorCode::NoDecayFit, "decay fit is inconclusive; no envelope available");
}

double DecayFit::phi_hat(double n) const { return envelope(n) / norm_product; }

DecayFit fit_decay(const CorrelationSeries& series) {
  DecayFit fit;
  fit.norm_product = series.phi_norm.total() * series.psi_norm.total();
  if (!(fit.norm_product > 0.0)) fit.norm_product = 1.0;

  // Leading run above the noise floor. A later isolated excursion above it is
  // far more likely noise than signal.
  auto above = [&](std::size_t i) {
    return series.lags[i] > 0 && series.values[i] > 0.0 && series.values[i] > 3.0 * series.half_widths[i];
  };
  std::size_t first = 0;
  while (first < series.values.size() && !above(first)) ++first;
  std::size_t last = first;
  while (last < series.values.size() && above(last)) ++last;
  fit.usable = last - first;
  if (fit.usable == 0) return fit;
  if (fit.usable < 6) {
    throw Error(ErrorCode::Degenerate,
                fmt::format("only {} lags above the noise floor, need 6", fit.usable));
  }
  fit.first_lag = series.lags[first];
  fit.last_lag = series.lags[last - 1];

  std::vector<double> n, log_n, log_v;
  for (std::size_t i = first; i < last; ++i) {
    n.push_back(static_cast<double>(series.lags[i]));
    log_n.push_back(std::log(n.back()));
    log_v.push_back(std::log(series.values[i]));
  }
  const auto exp_fit = fit_line(n, log_v);
  const auto poly_fit = fit_line(log_n, log_v);
  fit.exp_residual = exp_fit.rms_residual;
  fit.poly_residual = poly_fit.rms_residual;
  const bool exponential = exp_fit.rms_residual <= poly_fit.rms_residual;
  const auto& chosen = exponential ? exp_fit : poly_fit;
  if (!(chosen.slope < 0.0)) return fit;
  fit.decay_class = exponential ? DecayClass::Exponential : DecayClass::Polynomial;
  fit.rate = -chosen.slope;
  fit.log_prefactor = chosen.intercept;
  fit.max_abs_residual = chosen.max_abs_residual;
  return fit;
}

DecayFit reference_decay(const SystemSpec& system, std::uint64_t seed, std::size_t samples,
                         const CorrelationOptions& options) {
  std::vector<std::uint64_t> lags(30);
  for (std::size_t i = 0; i < lags.size(); ++i) lags[i] = i + 1;
  const auto ramp = TestFunction::ramp(0, 1024.0);
  return fit_decay(estimate_correlation(system, ramp, ramp, lags, seed, samples, options));
}

IntersectionCheck intersection_bound_check(const SystemSpec& system, const Observable& f,
                                           const RadiusLadder& ladder, std::size_t k,
                                           std::size_t j, std::uint64_t seed, std::size_t samples,
                                           const DecayFit& decay, const EstimatorOptions& options) {
  if (!(k > j && j >= 1 && k < ladder.size())) {
    invalid(fmt::format("intersection check needs ladder indices k > j >= 1 with k < {}", ladder.size()));
  }
  if (decay.decay_class == DecayClass::Inconclusive) {
    throw Error(ErrorCode::NoDecayFit, "no decay envelope available for the correlation term");
  }
  if (samples < 100) invalid("intersection check needs at least 100 samples");

  IntersectionCheck out;
  out.k = k;
  out.j = j;
  const double rk = ladder[k], rj = ladder[j];
  const PointSource points(system, derive_key(seed, stream::intersection, 0), samples);
  const std::size_t chunks = chunk_count(samples);
  std::vector<std::uint64_t> hits(chunks, 0);
  parallel_for(chunks, options.workers, [&](std::size_t c) {
    const std::size_t end = std::min(samples, (c + 1) * kTallyChunk);
    for (std::size_t i = c * kTallyChunk; i < end; ++i) {
      OrbitCursor cursor(system, points(i));
      while (cursor.steps() < j) cursor.advance();
      if (!(f.evaluate(cursor.coords()) <= rj)) continue;
      while (cursor.steps() < k) cursor.advance();
      if (f.evaluate(cursor.coords()) <= rk) ++hits[c];
    }
  });
  std::uint64_t total = 0;
  for (auto h : hits) total += h;
  const double n = static_cast<double>(samples);
  const double p = static_cast<double>(total) / n;
  out.lhs = MeasureEstimate{p, z_for_confidence(options.confidence) * std::sqrt(p * (1.0 - p) / n), samples, false};

  const double radii[2] = {ladder[k - 1], ladder[j - 1]};
  const auto mu = estimate_measures(f, radii, system, derive_key(seed, stream::intersection, 1), samples, options);
  out.product = mu[0].value * mu[1].value;
  const double l = f.lipschitz();
  out.correlation_term = 4.0 * l * l * decay.phi_hat(static_cast<double>(k - j)) /
                         ((ladder[k - 1] - rk) * (ladder[j - 1] - rj));
  out.rhs = out.product + out.correlation_term;
  out.holds = out.lhs.value <= out.rhs + out.lhs.half_width;
  return out;
}

}  // namespace hitlab

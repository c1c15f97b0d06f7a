#include "hitlab/observables.hpp"

#include <algorithm>
#include <array>
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

std::string format_values(std::span<const double> v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += fmt::format("{}{}", i ? "," : "", v[i]);
  return out;
}

double unit_ball_volume(std::size_t k) {
  const double h = static_cast<double>(k) / 2.0;
  return std::pow(std::numbers::pi, h) / std::tgamma(h + 1.0);
}

/// Volume of a radius-r ball in the k-torus, when it does not overlap itself.
std::optional<double> torus_ball_volume(std::size_t k, double r) {
  if (r < 0) return 0.0;
  if (k == 1) return std::min(2.0 * r, 1.0);
  if (r < 0.5) return unit_ball_volume(k) * std::pow(r, static_cast<double>(k));
  return std::nullopt;
}

}  // namespace

Observable Observable::dist_to_point(std::vector<double> target) {
  if (target.empty() || target.size() > kMaxCodomainDim) invalid("distance target needs 1..8 coordinates");
  Observable f;
  f.label_ = "dist:" + format_values(target);
  f.domain_dim_ = target.size();
  f.lipschitz_ = 1.0;
  f.sup_bound_ = 0.5 * std::sqrt(static_cast<double>(target.size()));
  f.rule_ = DistToPoint{std::move(target)};
  return f;
}

Observable Observable::dist_to_projected(std::vector<std::size_t> coords, std::vector<double> target,
                                         std::size_t domain_dim) {
  if (coords.empty() || coords.size() != target.size() || coords.size() > kMaxCodomainDim) {
    invalid("projected distance needs matching coordinate and target lists");
  }
  for (auto c : coords) {
    if (c >= domain_dim) invalid("projected coordinate outside the domain");
  }
  Observable f;
  std::string idx;
  for (std::size_t i = 0; i < coords.size(); ++i) idx += (i ? "," : "") + std::to_string(coords[i] + 1);
  f.label_ = "projdist:" + idx + ":" + format_values(target);
  f.domain_dim_ = domain_dim;
  f.lipschitz_ = 1.0;
  f.sup_bound_ = 0.5 * std::sqrt(static_cast<double>(coords.size()));
  f.rule_ = DistToProjectedPoint{std::move(coords), std::move(target)};
  return f;
}

Observable Observable::pushforward(ObservationMap map, std::vector<double> image_target) {
  if (image_target.size() != map.codomain_dim()) invalid("pushforward target has the wrong dimension");
  Observable f;
  f.label_ = "pushdist:" + map.label() + ":" + format_values(image_target);
  f.domain_dim_ = map.domain_dim();
  f.lipschitz_ = map.lipschitz();
  if (map.is_constant()) {
    f.sup_bound_ = 0.0;
  } else if (map.periodic_codomain()) {
    f.sup_bound_ = 0.5 * std::sqrt(static_cast<double>(map.codomain_dim()));
  } else {
    const std::vector<double> origin(map.domain_dim(), 0.0);
    f.sup_bound_ = map.lipschitz() * std::sqrt(static_cast<double>(map.domain_dim())) +
                   map.distance(map.evaluate(origin), image_target);
  }
  f.rule_ = PushforwardDist{std::move(map), std::move(image_target)};
  return f;
}

Observable Observable::pushforward_from(ObservationMap map, std::span<const double> x0) {
  auto target = map.evaluate(x0);
  return pushforward(std::move(map), std::move(target));
}

Observable Observable::weighted_sum(std::vector<WeightedTerm> terms) {
  if (terms.empty()) invalid("weighted sum needs at least one term");
  Observable f;
  f.lipschitz_ = 0.0;
  f.sup_bound_ = 0.0;
  std::string label = "sum:";
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& t = terms[i];
    if (!t.f || !(t.weight >= 0.0)) invalid("weighted sum terms need non-negative weights");
    if (i && t.f->domain_dim() != terms[0].f->domain_dim()) invalid("weighted sum terms disagree on dimension");
    f.lipschitz_ += t.weight * t.f->lipschitz();
    f.sup_bound_ += t.weight * t.f->sup_bound();
    label += fmt::format("{}{}*{}", i ? ";" : "", t.weight, t.f->label());
  }
  f.label_ = std::move(label);
  f.domain_dim_ = terms[0].f->domain_dim();
  f.rule_ = WeightedSum{std::move(terms)};
  return f;
}

Observable Observable::thickened(Observable inner, double offset) {
  if (!(offset >= 0.0)) invalid("thickening offset must be non-negative");
  Observable f;
  f.label_ = fmt::format("fat:{}:{}", offset, inner.label());
  f.domain_dim_ = inner.domain_dim();
  f.lipschitz_ = inner.lipschitz();
  f.sup_bound_ = std::max(0.0, inner.sup_bound() - offset);
  f.rule_ = Thickened{std::make_shared<const Observable>(std::move(inner)), offset};
  return f;
}

double Observable::evaluate(std::span<const double> x) const {
  return std::visit(
      [&](const auto& r) -> double {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, DistToPoint>) {
          return torus_distance(x, r.target);
        } else if constexpr (std::is_same_v<R, DistToProjectedPoint>) {
          std::array<double, kMaxCodomainDim> buf;
          for (std::size_t i = 0; i < r.coords.size(); ++i) buf[i] = x[r.coords[i]];
          return torus_distance(std::span<const double>(buf.data(), r.coords.size()), r.target);
        } else if constexpr (std::is_same_v<R, PushforwardDist>) {
          if (r.map.is_constant()) return 0.0;
          std::array<double, kMaxCodomainDim> buf;
          const std::span<double> image(buf.data(), r.map.codomain_dim());
          r.map.evaluate(x, image);
          return r.map.distance(image, r.image_target);
        } else if constexpr (std::is_same_v<R, WeightedSum>) {
          double s = 0.0;
          for (const auto& t : r.terms) s += t.weight * t.f->evaluate(x);
          return s;
        } else {
          return std::max(0.0, r.inner->evaluate(x) - r.offset);
        }
      },
      rule_);
}

double Observable::evaluate(const PhasePoint& x) const {
  std::array<double, kMaxCodomainDim> buf;
  const std::span<double> coords(buf.data(), x.dimension());
  x.coords(coords);
  return evaluate(std::span<const double>(coords));
}

double evaluate(const Observable& f, const PhasePoint& x) { return f.evaluate(x); }

Observable parse_observable(std::string_view spec, std::size_t domain_dim) {
  spec = text::trim(spec);
  if (spec.starts_with("dist:")) {
    auto target = text::to_doubles(spec.substr(5), "distance target");
    if (target.size() != domain_dim) {
      invalid(fmt::format("'{}' has {} coordinates, system has {}", spec, target.size(), domain_dim));
    }
    return Observable::dist_to_point(std::move(target));
  }
  if (spec.starts_with("projdist:")) {
    const auto rest = spec.substr(9);
    const auto colon = rest.find(':');
    if (colon == std::string_view::npos) invalid(fmt::format("'{}' needs projdist:<coords>:<target>", spec));
    return Observable::dist_to_projected(text::to_coords(rest.substr(0, colon), domain_dim),
                                         text::to_doubles(rest.substr(colon + 1), "projected target"),
                                         domain_dim);
  }
  if (spec.starts_with("pushdist:")) {
    const auto rest = spec.substr(9);
    const auto colon = rest.rfind(':');
    if (colon == std::string_view::npos) invalid(fmt::format("'{}' needs pushdist:<map>:<target>", spec));
    return Observable::pushforward(parse_observation_map(rest.substr(0, colon), domain_dim),
                                   text::to_doubles(rest.substr(colon + 1), "image target"));
  }
  if (spec.starts_with("fat:")) {
    const auto rest = spec.substr(4);
    const auto colon = rest.find(':');
    if (colon == std::string_view::npos) invalid(fmt::format("'{}' needs fat:<offset>:<observable>", spec));
    return Observable::thickened(parse_observable(rest.substr(colon + 1), domain_dim),
                                 text::to_double(rest.substr(0, colon), "thickening offset"));
  }
  if (spec.starts_with("sum:")) {
    std::vector<WeightedTerm> terms;
    for (auto term : text::split(spec.substr(4), ';')) {
      const auto star = term.find('*');
      if (star == std::string_view::npos) invalid(fmt::format("sum term '{}' needs <weight>*<observable>", term));
      terms.push_back({text::to_double(term.substr(0, star), "sum weight"),
                       std::make_shared<const Observable>(parse_observable(term.substr(star + 1), domain_dim))});
    }
    return Observable::weighted_sum(std::move(terms));
  }
  invalid(fmt::format("unknown observable '{}'", spec));
}

double mollifier_value(double f_value, double r_prev, double r) {
  if (!(r > 0.0 && r < r_prev)) invalid("mollifier needs 0 < r < r_prev");
  if (f_value <= r) return 1.0;
  if (f_value >= r_prev) return 0.0;
  return (r_prev - f_value) / (r_prev - r);
}

double mollifier(const Observable& f, double r_prev, double r, const PhasePoint& x) {
  return mollifier_value(f.evaluate(x), r_prev, r);
}

// ---------------------------------------------------------------------------

RadiusLadder::RadiusLadder(std::vector<double> radii, double gap) : radii_(std::move(radii)), gap_(gap) {
  if (!(gap_ > 0.0 && gap_ < 1.0)) {
    throw Error(ErrorCode::ConfigInvalid, fmt::format("ladder gap constant {} outside (0,1)", gap_), "ladder.gap");
  }
  if (radii_.empty()) throw Error(ErrorCode::ConfigInvalid, "ladder has no rungs", "ladder");
  for (std::size_t k = 0; k < radii_.size(); ++k) {
    if (!(radii_[k] > 0.0) || !std::isfinite(radii_[k])) {
      throw Error(ErrorCode::ConfigInvalid, fmt::format("ladder rung {} is not a positive radius", k), "ladder");
    }
    if (k == 0) continue;
    if (!(radii_[k] < radii_[k - 1])) {
      throw Error(ErrorCode::ConfigInvalid, fmt::format("ladder rung {} does not decrease", k), "ladder");
    }
    if (!(radii_[k] > gap_ * radii_[k - 1])) {
      throw Error(ErrorCode::ConfigInvalid,
                  fmt::format("ladder rung {} violates r_(k+1) > c r_k with c = {}", k, gap_), "ladder");
    }
  }
}

RadiusLadder RadiusLadder::dyadic(double first_exponent, double last_exponent, double step, double gap) {
  if (!(step > 0.0)) throw Error(ErrorCode::ConfigInvalid, "ladder step must be positive", "ladder.step");
  std::vector<double> radii;
  const auto count = static_cast<std::size_t>(std::floor((last_exponent - first_exponent) / step + 1e-9)) + 1;
  for (std::size_t k = 0; k < count; ++k) {
    radii.push_back(std::exp2(-(first_exponent + static_cast<double>(k) * step)));
  }
  return RadiusLadder(std::move(radii), gap);
}

double MeasureEstimate::lower() const { return std::clamp(value - half_width, 0.0, 1.0); }
double MeasureEstimate::upper() const { return std::clamp(value + half_width, 0.0, 1.0); }

std::optional<double> closed_form_measure(const SystemSpec& system, const Observable& f, double r) {
  if (!system.lebesgue()) return std::nullopt;
  return std::visit(
      [&](const auto& rule) -> std::optional<double> {
        using R = std::decay_t<decltype(rule)>;
        if constexpr (std::is_same_v<R, DistToPoint>) {
          if (rule.target.size() != system.dimension()) return std::nullopt;
          return torus_ball_volume(system.dimension(), r);
        } else if constexpr (std::is_same_v<R, DistToProjectedPoint>) {
          return torus_ball_volume(rule.coords.size(), r);
        } else if constexpr (std::is_same_v<R, Thickened>) {
          return closed_form_measure(system, *rule.inner, r + rule.offset);
        } else {
          return std::nullopt;
        }
      },
      f.rule());
}

std::vector<double> sample_observable(const Observable& f, const SystemSpec& system,
                                      std::uint64_t seed, std::size_t samples, unsigned workers) {
  const std::size_t d = system.dimension();
  if (f.domain_dim() != d) invalid("observable dimension does not match the system");
  if (!system.lebesgue()) {
    const auto coords = sample_invariant_coords(system, seed, samples);
    std::vector<double> out(samples);
    for (std::size_t i = 0; i < samples; ++i) out[i] = f.evaluate(std::span(coords).subspan(i * d, d));
    return out;
  }
  const std::size_t L = std::holds_alternative<Doubling>(system.kind()) ? 1 : system.limbs_per_coord();
  std::vector<double> out(samples);
  parallel_for(chunk_count(samples), workers, [&](std::size_t chunk) {
    std::array<double, kMaxCodomainDim> x;
    const std::size_t end = std::min(samples, (chunk + 1) * kTallyChunk);
    for (std::size_t i = chunk * kTallyChunk; i < end; ++i) {
      const std::uint64_t key = derive_key(seed, stream::invariant, i);
      for (std::size_t c = 0; c < d; ++c) x[c] = unit_from_word(random_word(key, c * L));
      out[i] = f.evaluate(std::span<const double>(x.data(), d));
    }
  });
  return out;
}

std::vector<MeasureEstimate> estimate_measures(const Observable& f, std::span<const double> radii,
                                               const SystemSpec& system, std::uint64_t seed,
                                               std::size_t samples, const EstimatorOptions& options) {
  if (samples < 100) invalid("measure estimation needs at least 100 samples");
  std::vector<MeasureEstimate> out(radii.size());
  std::vector<std::size_t> pending;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (auto exact = closed_form_measure(system, f, radii[k])) {
      out[k] = MeasureEstimate{*exact, 0.0, 0, true};
    } else {
      pending.push_back(k);
    }
  }
  if (pending.empty()) return out;
  auto values = sample_observable(f, system, seed, samples, options.workers);
  std::sort(values.begin(), values.end());
  const double z = z_for_confidence(options.confidence);
  const double n = static_cast<double>(samples);
  for (auto k : pending) {
    const auto hits = std::upper_bound(values.begin(), values.end(), radii[k]) - values.begin();
    const double p = static_cast<double>(hits) / n;
    out[k] = MeasureEstimate{p, z * std::sqrt(p * (1.0 - p) / n), samples, false};
  }
  return out;
}

MeasureEstimate estimate_measure(const Observable& f, double r, const SystemSpec& system,
                                 std::uint64_t seed, std::size_t samples,
                                 const EstimatorOptions& options) {
  return estimate_measures(f, std::span<const double>(&r, 1), system, seed, samples, options)[0];
}

DimensionEstimate fit_dimension(std::span<const double> radii, std::vector<MeasureEstimate> measures,
                                const EstimatorOptions& options) {
  DimensionEstimate est;
  est.radii.assign(radii.begin(), radii.end());
  est.used.assign(radii.size(), false);
  std::vector<double> x, y;
  bool all_exact = true;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const auto& m = measures[k];
    const bool enough = m.exact || m.value * static_cast<double>(m.samples) >= options.min_expected_hits;
    if (m.value > 0.0 && enough) {
      est.used[k] = true;
      x.push_back(std::log(radii[k]));
      y.push_back(std::log(m.value));
      all_exact = all_exact && m.exact;
      if (x.size() == 1) est.window_first = k;
      est.window_last = k;
    }
  }
  est.measures = std::move(measures);
  if (x.size() < 4) {
    throw Error(ErrorCode::DegenerateLadder,
                fmt::format("only {} ladder rungs have usable measure estimates, need 4", x.size()));
  }
  const auto fit = fit_line(x, y);
  est.slope = fit.slope;
  est.slope_stderr = fit.slope_stderr;
  est.window_width = std::clamp<std::size_t>(options.window, 2, x.size());
  const auto slopes = window_slopes(x, y, est.window_width);
  est.d_upper = *std::max_element(slopes.begin(), slopes.end());
  est.d_lower = *std::min_element(slopes.begin(), slopes.end());
  est.exact = all_exact;
  return est;
}

DimensionEstimate estimate_dimension(const Observable& f, const RadiusLadder& ladder,
                                     const SystemSpec& system, std::uint64_t seed,
                                     std::size_t samples_per_rung, const EstimatorOptions& options) {
  if (ladder.size() < 4) {
    throw Error(ErrorCode::DegenerateLadder, "dimension estimation needs at least 4 ladder rungs");
  }
  auto measures = estimate_measures(f, ladder.radii(), system, seed, samples_per_rung, options);
  return fit_dimension(ladder.radii(), std::move(measures), options);
}

}  // namespace hitlab

#include "hitlab/return_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <fmt/format.h>

#include "hitlab/error.hpp"
#include "hitlab/hitting.hpp"
#include "hitlab/parallel.hpp"
#include "hitlab/random.hpp"
#include "hitlab/stats.hpp"

namespace hitlab {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); }

constexpr std::uint64_t kStallAttempts = 10'000'000;
constexpr double kStallRate = 1e-6;

// A ball of radius r around `center` in the coordinates `coords`, all other
// coordinates free. Only used when r < 1/2, so the ball does not wrap.
struct DirectRegion {
  std::vector<std::size_t> coords;
  std::vector<double> center;
  double radius = 0.0;
};

std::optional<DirectRegion> direct_region(const SystemSpec& system, const Observable& f, double r) {
  if (!system.lebesgue()) return std::nullopt;
  return std::visit(
      [&](const auto& rule) -> std::optional<DirectRegion> {
        using R = std::decay_t<decltype(rule)>;
        if constexpr (std::is_same_v<R, DistToPoint>) {
          if (!(r < 0.5) || rule.target.size() != system.dimension()) return std::nullopt;
          DirectRegion region{{}, rule.target, r};
          for (std::size_t c = 0; c < rule.target.size(); ++c) region.coords.push_back(c);
          return region;
        } else if constexpr (std::is_same_v<R, DistToProjectedPoint>) {
          if (!(r < 0.5)) return std::nullopt;
          return DirectRegion{rule.coords, rule.target, r};
        } else if constexpr (std::is_same_v<R, Thickened>) {
          return direct_region(system, *rule.inner, r + rule.offset);
        } else {
          return std::nullopt;
        }
      },
      f.rule());
}

std::uint64_t word_from_unit(double x) {
  x -= std::floor(x);
  return x >= 1.0 ? 0 : static_cast<std::uint64_t>(std::ldexp(x, 64));
}

// Every bit of the leading word is random. Building the coordinate from a
// double would leave bits 54..64 zero, and the doubling map reads those bits
// as a run of zeros about 50 steps later, which biases return times to
// targets with a zero run in their binary expansion.
PhasePoint direct_sample(const SystemSpec& system, const Observable& f, double r,
                         const DirectRegion& region, std::uint64_t key) {
  CounterRng rng(key);
  const std::size_t d = system.dimension();
  const auto r_word = static_cast<std::uint64_t>(std::ldexp(region.radius, 64));
  std::vector<std::uint64_t> words(d);
  std::vector<double> x(d);
  for (;;) {
    for (std::size_t c = 0; c < d; ++c) words[c] = rng.next_word();
    double norm2 = 0.0;
    for (std::size_t i = 0; i < region.coords.size(); ++i) {
      const auto offset = static_cast<std::uint64_t>(
          (static_cast<unsigned __int128>(2 * r_word) * rng.next_word()) >> 64);
      const double u = std::ldexp(static_cast<double>(offset), -64) - region.radius;
      norm2 += u * u;
      words[region.coords[i]] = word_from_unit(region.center[i]) - r_word + offset;
    }
    if (norm2 > region.radius * region.radius) continue;
    for (std::size_t c = 0; c < d; ++c) x[c] = unit_from_word(words[c]);
    // Guards the rounding at the boundary of the region.
    if (f.evaluate(std::span<const double>(x)) <= r) {
      return point_with_leading_words(system, words, rng.next_word());
    }
  }
}

[[noreturn]] void stall(std::uint64_t attempts, std::size_t accepted) {
  throw Error(ErrorCode::RejectionStall,
              fmt::format("rejection sampling accepted {} of {} candidates (rate below {})", accepted,
                          attempts, kStallRate));
}

std::vector<PhasePoint> rejection_lebesgue(const SystemSpec& system, const Observable& f, double r,
                                           std::uint64_t seed, std::size_t count, unsigned workers) {
  const std::size_t d = system.dimension();
  const std::size_t L = std::holds_alternative<Doubling>(system.kind()) ? 1 : system.limbs_per_coord();
  constexpr std::size_t kBatch = 64 * kTallyChunk;
  std::vector<PhasePoint> out;
  std::uint64_t attempts = 0;
  while (out.size() < count) {
    std::vector<std::vector<std::uint64_t>> accepted(kBatch / kTallyChunk);
    parallel_for(accepted.size(), workers, [&](std::size_t c) {
      std::vector<double> x(d);
      for (std::size_t i = 0; i < kTallyChunk; ++i) {
        const std::uint64_t index = attempts + c * kTallyChunk + i;
        const std::uint64_t key = derive_key(seed, stream::invariant, index);
        for (std::size_t k = 0; k < d; ++k) x[k] = unit_from_word(random_word(key, k * L));
        if (f.evaluate(std::span<const double>(x)) <= r) accepted[c].push_back(index);
      }
    });
    attempts += kBatch;
    for (const auto& chunk : accepted) {
      for (auto index : chunk) {
        if (out.size() < count) out.push_back(invariant_sample(system, seed, index));
      }
    }
    if (out.size() < count && attempts >= kStallAttempts &&
        static_cast<double>(out.size()) < kStallRate * static_cast<double>(attempts)) {
      stall(attempts, out.size());
    }
  }
  return out;
}

std::vector<PhasePoint> rejection_orbit(const SystemSpec& system, const Observable& f, double r,
                                        std::uint64_t seed, std::size_t count) {
  // Candidates are the invariant sampler's orbit points: burn-in, then stride.
  OrbitCursor cursor(system, sample_invariant(system, seed, 1).front());
  const std::uint64_t stride = std::max<std::uint64_t>(1, system.sampler().stride);
  std::vector<PhasePoint> out;
  std::uint64_t attempts = 0;
  while (out.size() < count) {
    if (f.evaluate(cursor.coords()) <= r) out.push_back(cursor.point());
    ++attempts;
    if (out.size() < count && attempts >= kStallAttempts &&
        static_cast<double>(out.size()) < kStallRate * static_cast<double>(attempts)) {
      stall(attempts, out.size());
    }
    for (std::uint64_t s = 0; s < stride; ++s) cursor.advance();
  }
  return out;
}

}  // namespace

std::vector<PhasePoint> sample_conditioned(const SystemSpec& system, const Observable& f, double r,
                                           std::uint64_t seed, std::size_t count, unsigned workers) {
  if (!(r >= 0.0)) invalid("conditioning radius must be non-negative");
  if (f.domain_dim() != system.dimension()) invalid("observable dimension does not match the system");
  const std::uint64_t base = derive_key(seed, stream::conditioned, 0);
  if (const auto region = direct_region(system, f, r); region && r > 0.0) {
    std::vector<std::optional<PhasePoint>> slots(count);
    parallel_for(chunk_count(count), workers, [&](std::size_t c) {
      const std::size_t end = std::min(count, (c + 1) * kTallyChunk);
      for (std::size_t i = c * kTallyChunk; i < end; ++i) {
        slots[i] = direct_sample(system, f, r, *region, derive_key(base, stream::conditioned, i));
      }
    });
    std::vector<PhasePoint> out;
    out.reserve(count);
    for (auto& p : slots) out.push_back(std::move(*p));
    return out;
  }
  if (system.lebesgue()) return rejection_lebesgue(system, f, r, base, count, workers);
  return rejection_orbit(system, f, r, base, count);
}

ReturnSample return_times(const SystemSpec& system, const Observable& f, double r,
                          std::uint64_t seed, std::size_t count, const ReturnOptions& options) {
  if (count == 0) invalid("return statistics need at least one sample");
  ReturnSample out;
  out.radius = r;
  if (auto exact = closed_form_measure(system, f, r)) {
    out.measure = MeasureEstimate{*exact, 0.0, 0, true};
  } else {
    EstimatorOptions eo;
    eo.confidence = options.confidence;
    eo.workers = options.workers;
    out.measure = estimate_measure(f, r, system, derive_key(seed, stream::conditioned, 1),
                                   options.measure_samples, eo);
  }
  if (!(out.measure.value > 0.0)) {
    throw Error(ErrorCode::Degenerate, fmt::format("target S_r has estimated measure 0 at r = {}", r));
  }
  out.cap = options.cap != 0 ? options.cap : default_cap(out.measure.value, 100.0);

  const auto starts = sample_conditioned(system, f, r, seed, count, options.workers);
  out.tau.assign(count, 0);
  out.censored.assign(count, false);
  std::vector<char> censored(count, 0);
  parallel_for(count, options.workers, [&](std::size_t i) {
    const auto rec = first_hits(
        system, starts[i], [&f](std::span<const double> c) { return f.evaluate(c); },
        std::span<const double>(&r, 1), out.cap, i)[0];
    out.tau[i] = rec.tau;
    censored[i] = rec.censored ? 1 : 0;
  });
  for (std::size_t i = 0; i < count; ++i) {
    out.censored[i] = censored[i] != 0;
    out.censored_count += censored[i];
  }
  return out;
}

std::vector<double> default_return_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 50; ++i) grid.push_back(i / 10.0);
  return grid;
}

ReturnCurve return_curve(const ReturnSample& sample, std::span<const double> grid) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) invalid("return-curve grid must increase");
  }
  ReturnCurve curve;
  curve.radius = sample.radius;
  curve.measure = sample.measure;
  curve.t.assign(grid.begin(), grid.end());
  curve.samples = sample.tau.size();
  curve.cap = sample.cap;
  curve.censored = sample.censored_count;
  const double mu = sample.measure.value;
  const double n = static_cast<double>(sample.tau.size());
  for (double t : grid) {
    const double threshold = t / mu;
    std::size_t count = 0;
    for (std::size_t i = 0; i < sample.tau.size(); ++i) {
      if (sample.censored[i] || static_cast<double>(sample.tau[i]) >= threshold) ++count;
    }
    curve.g.push_back(static_cast<double>(count) / n);
    curve.beyond_cap.push_back(sample.censored_count > 0 && threshold > static_cast<double>(sample.cap));
  }
  return curve;
}

ReturnCurve return_curve(const SystemSpec& system, const Observable& f, double r,
                         std::span<const double> grid, std::uint64_t seed, std::size_t count,
                         const ReturnOptions& options) {
  return return_curve(return_times(system, f, r, seed, count, options), grid);
}

double exp_law_distance(const ReturnCurve& curve) {
  if (curve.t.empty()) invalid("empty return curve");
  double worst = 0.0;
  for (std::size_t i = 0; i < curve.t.size(); ++i) {
    worst = std::max(worst, std::fabs(curve.g[i] - std::exp(-curve.t[i])));
  }
  return worst;
}

std::size_t jump_clusters(const ReturnCurve& curve, double tolerance) {
  std::size_t clusters = 0;
  bool in_jump = false;
  for (std::size_t i = 1; i < curve.g.size(); ++i) {
    const bool drop = curve.g[i - 1] - curve.g[i] > tolerance;
    if (drop && !in_jump) ++clusters;
    in_jump = drop;
  }
  return clusters;
}

std::vector<std::uint64_t> distinct_return_times(const ReturnSample& sample) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < sample.tau.size(); ++i) {
    if (!sample.censored[i]) out.push_back(sample.tau[i]);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

TrivialityIndicator triviality_indicator(const ReturnSample& sample, double l, double confidence) {
  if (!(l > 0.0)) invalid("triviality indicator needs l > 0");
  TrivialityIndicator ind;
  ind.l = l;
  ind.radius = sample.radius;
  ind.samples = sample.tau.size();
  const double threshold = l / sample.measure.value;
  std::size_t above = 0;
  for (std::size_t i = 0; i < sample.tau.size(); ++i) {
    const double tau = static_cast<double>(sample.tau[i]);
    if (sample.censored[i] || tau > threshold) {
      ++above;
    } else if (tau == threshold) {
      ++ind.ties;
    }
  }
  const double n = static_cast<double>(ind.samples);
  ind.value = static_cast<double>(above) / n;
  ind.half_width = z_for_confidence(confidence) * std::sqrt(ind.value * (1.0 - ind.value) / n);
  return ind;
}

TrivialityIndicator triviality_indicator(const SystemSpec& system, const Observable& f, double r,
                                         double l, std::uint64_t seed, std::size_t count,
                                         const ReturnOptions& options) {
  return triviality_indicator(return_times(system, f, r, seed, count, options), l, options.confidence);
}

KacCheck kac_check(const ReturnSample& sample) {
  std::vector<double> scaled(sample.tau.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    scaled[i] = static_cast<double>(sample.tau[i]) * sample.measure.value;
  }
  KacCheck kac;
  kac.product = mean(scaled);
  kac.std_error = scaled.size() > 1 ? stddev(scaled) / std::sqrt(static_cast<double>(scaled.size())) : 0.0;
  kac.censored = sample.censored_count;
  kac.consistent = std::fabs(kac.product - 1.0) <= 4.0 * kac.std_error;
  return kac;
}

}  // namespace hitlab

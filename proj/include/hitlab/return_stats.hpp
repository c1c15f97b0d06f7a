#pragma once

// Return times into a sublevel target S_r for starts drawn from mu restricted
// to S_r: the rescaled return curve g_r(t), its distance to the exponential
// law, the triviality indicator and a Kac sanity check.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hitlab/dynamics.hpp"
#include "hitlab/observables.hpp"

namespace hitlab {

struct ReturnOptions {
  /// Return-time cap; 0 means 100 / mu(S_r).
  std::uint64_t cap = 0;
  /// Invariant samples for mu(S_r) when no closed form exists.
  std::size_t measure_samples = 1'000'000;
  double confidence = 0.95;
  unsigned workers = 0;
};

/// N points distributed as mu conditioned on S_r. Balls and strips of radius
/// below 1/2 under Lebesgue are sampled directly; anything else by rejection
/// from the invariant sampler. Throws RejectionStall when acceptance stays
/// below 1e-6 after 1e7 attempts.
std::vector<PhasePoint> sample_conditioned(const SystemSpec& system, const Observable& f, double r,
                                           std::uint64_t seed, std::size_t count,
                                           unsigned workers = 0);

/// Return times of conditioned starts. Shared by the curve, the indicator and
/// the Kac check so they see identical samples.
struct ReturnSample {
  double radius = 0.0;
  MeasureEstimate measure;
  std::uint64_t cap = 0;
  std::vector<std::uint64_t> tau;  // cap for censored entries
  std::vector<bool> censored;
  std::size_t censored_count = 0;
};

ReturnSample return_times(const SystemSpec& system, const Observable& f, double r,
                          std::uint64_t seed, std::size_t count, const ReturnOptions& options = {});

struct ReturnCurve {
  double radius = 0.0;
  MeasureEstimate measure;
  std::vector<double> t;
  std::vector<double> g;
  /// Grid points beyond cap * mu, where censored returns make g a lower bound.
  std::vector<bool> beyond_cap;
  std::size_t samples = 0;
  std::uint64_t cap = 0;
  std::size_t censored = 0;
};

/// {0, 0.1, ..., 5}.
std::vector<double> default_return_grid();

/// g(t) = #{tau_i >= t / mu} / N.
ReturnCurve return_curve(const ReturnSample& sample, std::span<const double> grid);
ReturnCurve return_curve(const SystemSpec& system, const Observable& f, double r,
                         std::span<const double> grid, std::uint64_t seed, std::size_t count,
                         const ReturnOptions& options = {});

/// max over the grid of |g(t) - e^-t|.
double exp_law_distance(const ReturnCurve& curve);

/// Runs of consecutive grid steps over which g drops by more than `tolerance`.
std::size_t jump_clusters(const ReturnCurve& curve, double tolerance = 0.0);

/// Sorted distinct uncensored return times.
std::vector<std::uint64_t> distinct_return_times(const ReturnSample& sample);

struct TrivialityIndicator {
  double l = 0.0;
  double radius = 0.0;
  double value = 0.0;  // #{tau > l / mu} / N
  double half_width = 0.0;
  /// Starts with tau exactly l / mu: counted by g(l) but not by the indicator.
  std::size_t ties = 0;
  std::size_t samples = 0;
};

TrivialityIndicator triviality_indicator(const ReturnSample& sample, double l,
                                         double confidence = 0.95);
TrivialityIndicator triviality_indicator(const SystemSpec& system, const Observable& f, double r,
                                         double l, std::uint64_t seed, std::size_t count,
                                         const ReturnOptions& options = {});

struct KacCheck {
  double product = 0.0;  // mean return time * mu(S_r)
  double std_error = 0.0;
  std::size_t censored = 0;
  /// |product - 1| <= 4 stderr.
  bool consistent = false;
};

KacCheck kac_check(const ReturnSample& sample);

}  // namespace hitlab

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "hitlab/dynamics.hpp"
#include "hitlab/observables.hpp"

namespace hitlab {

/// First entry time into S_r over n = 1..cap. A censored record has
/// tau == cap and censored == true.
struct HittingRecord {
  std::uint64_t point_id = 0;
  double radius = 0.0;
  std::uint64_t tau = 0;
  bool censored = false;
  std::uint64_t cap = 0;
  std::uint64_t steps_used = 0;
};

HittingRecord hitting_time(const SystemSpec& system, const PhasePoint& x, const Observable& f,
                           double r, std::uint64_t cap, std::uint64_t point_id = 0);

/// Hitting times for decreasing radii from a single orbit pass. Nested
/// sublevels make the result non-increasing in r by construction.
std::vector<HittingRecord> hitting_times(const SystemSpec& system, const PhasePoint& x,
                                         const Observable& f, std::span<const double> radii,
                                         std::uint64_t cap, std::uint64_t point_id = 0);

/// Same loop for an arbitrary target test `value(coords) <= radius`.
template <class Value>
std::vector<HittingRecord> first_hits(const SystemSpec& system, const PhasePoint& x,
                                      Value&& value, std::span<const double> radii,
                                      std::uint64_t cap, std::uint64_t point_id) {
  std::vector<HittingRecord> out(radii.size());
  for (std::size_t k = 0; k < radii.size(); ++k) {
    out[k] = HittingRecord{point_id, radii[k], cap, true, cap, 0};
  }
  if (radii.empty() || cap == 0) return out;
  OrbitCursor cursor(system, x);
  std::size_t hit = 0;
  for (std::uint64_t n = 1; n <= cap && hit < radii.size(); ++n) {
    cursor.advance();
    const double v = value(cursor.coords());
    while (hit < radii.size() && v <= radii[hit]) {
      out[hit].tau = n;
      out[hit].censored = false;
      ++hit;
    }
  }
  for (auto& rec : out) rec.steps_used = cursor.steps();
  return out;
}

struct ExponentOptions {
  /// Sliding-window width in rungs; 0 fits every uncensored rung at once.
  std::size_t window = 0;
};

struct ExponentEstimate {
  double R_upper = 0.0;
  double R_lower = 0.0;
  double slope = 0.0;  // least squares over every uncensored rung
  /// (-log r, log tau) for each uncensored rung, in ladder order.
  std::vector<std::pair<double, double>> pairs;
  double censor_fraction = 0.0;
  std::size_t window_width = 0;
  std::vector<HittingRecord> records;
};

/// Slopes of log tau against -log r. Censored rungs are excluded. Throws
/// AllCensored when fewer than two rungs are uncensored.
ExponentEstimate fit_exponent(std::vector<HittingRecord> records, const ExponentOptions& options = {});

ExponentEstimate estimate_R(const SystemSpec& system, const PhasePoint& x, const Observable& f,
                            const RadiusLadder& ladder, std::uint64_t cap,
                            const ExponentOptions& options = {}, std::uint64_t point_id = 0);

/// 50 / mu at the smallest rung, from tau ~ 1 / mu(S_r).
std::uint64_t default_cap(double smallest_measure, double factor = 50.0);

// ---------------------------------------------------------------------------

struct BCCounter {
  std::uint64_t k = 0;
  std::uint64_t Z = 0;
  double EZ = 0.0;
  double ratio = 0.0;
};

struct MeasureSource {
  enum class Kind { Exact, MonteCarlo };
  Kind kind = Kind::Exact;
  std::uint64_t seed = 0;
  std::size_t samples = 100'000;
  unsigned workers = 0;
};

/// r_i = i^-beta for i >= 1 and r_0 = 1.
double bc_radius(std::uint64_t i, double beta);

/// Cumulative counter Z_k = #{0 <= i <= k : f(T^i x) <= r_i} against
/// E(Z_k) = sum_i mu(S_{r_i}), reported at `checkpoints` (default: 1-2-5
/// steps per decade plus k_max). Requires k_max >= 1000 and
/// 0 < beta < 1 / d_upper.
std::vector<BCCounter> bc_counter_series(const SystemSpec& system, const PhasePoint& x,
                                         const Observable& f, double beta, std::uint64_t k_max,
                                         double d_upper, const MeasureSource& source,
                                         std::span<const std::uint64_t> checkpoints = {});

}  // namespace hitlab

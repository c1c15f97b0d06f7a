#pragma once

// Minimal approach distance d_n(x, p) = min_{1 <= i <= n} dist(pi(T^i x), p)
// along an exact toral-automorphism orbit, and its log-law exponent
// -log d_n / log n.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hitlab/dynamics.hpp"
#include "hitlab/observation.hpp"

namespace hitlab {

struct ApproachSeries {
  std::vector<double> target;
  std::vector<std::uint64_t> n;
  std::vector<double> d;  // running minimum at each grid point
  /// Least squares of -log d_n on log n over the largest decade of the grid.
  double exponent = 0.0;
  /// max and median of -log d_n / log n over the same tail window.
  double tail_max_ratio = 0.0;
  double tail_median_ratio = 0.0;
  std::size_t tail_first = 0;  // grid index where the tail window starts
};

/// Log-spaced grid 1..n_max with `per_decade` points per decade, deduplicated.
std::vector<std::uint64_t> log_grid(std::uint64_t n_max, std::size_t per_decade = 20);

/// Requires a toral automorphism, a projection map on its coordinates, a
/// target in the projected space and an increasing grid starting at n >= 1.
ApproachSeries approach_series(const SystemSpec& system, const ObservationMap& projection,
                               const PhasePoint& x, std::span<const double> p,
                               std::span<const std::uint64_t> n_grid);

}  // namespace hitlab

#pragma once

// Observed systems: hitting times measured through an observation map F,
// the local dimension of the pushforward F*mu, and the rank of dF.

#include <cstdint>
#include <span>
#include <vector>

#include "hitlab/dynamics.hpp"
#include "hitlab/hitting.hpp"
#include "hitlab/observables.hpp"
#include "hitlab/observation.hpp"

namespace hitlab {

/// First k in [1, cap] with dist(F(T^k x), F(x0)) <= r. A constant map hits
/// at k = 1 without iterating.
HittingRecord observed_hitting_time(const SystemSpec& system, const PhasePoint& x,
                                    std::span<const double> x0, const ObservationMap& F, double r,
                                    std::uint64_t cap, std::uint64_t point_id = 0);

/// Same for a decreasing list of radii from one orbit pass.
std::vector<HittingRecord> observed_hitting_times(const SystemSpec& system, const PhasePoint& x,
                                                  std::span<const double> x0,
                                                  const ObservationMap& F,
                                                  std::span<const double> radii, std::uint64_t cap,
                                                  std::uint64_t point_id = 0);

/// Sublevel dimension of f(x) = dist(F(x), F(x0)), which is the local
/// dimension of F*mu at F(x0).
DimensionEstimate pushforward_dimension(const SystemSpec& system, const ObservationMap& F,
                                        std::span<const double> x0, const RadiusLadder& ladder,
                                        std::uint64_t seed, std::size_t samples,
                                        const EstimatorOptions& options = {});

/// pushforward_dimension for many base points from one shared invariant
/// sample: images F(x_i) are computed once and reused for every base point.
std::vector<DimensionEstimate> pushforward_dimensions(const SystemSpec& system,
                                                      const ObservationMap& F,
                                                      std::span<const double> base_points,
                                                      const RadiusLadder& ladder,
                                                      std::uint64_t seed, std::size_t samples,
                                                      const EstimatorOptions& options = {});

struct RankReport {
  std::vector<double> base_point;
  double step = 0.0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> jacobian;  // row-major, rows = codomain dimension
  std::vector<double> singular_values;  // descending
  double tolerance = 0.0;
  std::size_t rank = 0;
};

inline constexpr double kDefaultJacobianStep = 1e-5;

/// Central finite-difference Jacobian of F at x and its numerical rank:
/// singular values above max(1e-6, 1e-8 sigma_max). Requires h in
/// [1e-8, 1e-2].
RankReport jacobian_rank(const ObservationMap& F, std::span<const double> x,
                         double h = kDefaultJacobianStep);

}  // namespace hitlab

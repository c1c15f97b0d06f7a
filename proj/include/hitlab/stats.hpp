#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hitlab {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double rms_residual = 0.0;
  double max_abs_residual = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope * x (needs >= 2 points).
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Slopes of every contiguous window of `width` points, in order.
std::vector<double> window_slopes(std::span<const double> x, std::span<const double> y,
                                  std::size_t width);

/// Two-sided normal quantile for a confidence level in (0,1), e.g. 1.96 at 0.95.
double z_for_confidence(double level);

double median(std::vector<double> values);
/// Quantile with linear interpolation between order statistics, q in [0,1].
double quantile(std::vector<double> values, double q);
double mean(std::span<const double> values);
/// Sample standard deviation (n - 1 denominator).
double stddev(std::span<const double> values);

}  // namespace hitlab

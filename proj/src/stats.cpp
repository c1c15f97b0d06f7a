#include "hitlab/stats.hpp"

#include <gsl/gsl_cdf.h>
#include <gsl/gsl_fit.h>
#include <gsl/gsl_statistics_double.h>

#include <algorithm>
#include <cmath>

#include "hitlab/error.hpp"

namespace hitlab {

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorCode::Degenerate, "line fit needs at least two paired points");
  }
  LineFit fit;
  double cov00 = 0, cov01 = 0, cov11 = 0, sumsq = 0;
  gsl_fit_linear(x.data(), 1, y.data(), 1, x.size(), &fit.intercept, &fit.slope, &cov00, &cov01,
                 &cov11, &sumsq);
  fit.points = x.size();
  fit.slope_stderr = x.size() > 2 ? std::sqrt(std::max(cov11, 0.0)) : 0.0;
  fit.rms_residual = std::sqrt(sumsq / static_cast<double>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    fit.max_abs_residual =
        std::max(fit.max_abs_residual, std::fabs(y[i] - fit.intercept - fit.slope * x[i]));
  }
  return fit;
}

std::vector<double> window_slopes(std::span<const double> x, std::span<const double> y,
                                  std::size_t width) {
  std::vector<double> out;
  if (width < 2 || x.size() < width) return out;
  for (std::size_t start = 0; start + width <= x.size(); ++start) {
    out.push_back(fit_line(x.subspan(start, width), y.subspan(start, width)).slope);
  }
  return out;
}

double z_for_confidence(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "confidence level must lie in (0,1)");
  }
  return gsl_cdf_ugaussian_Pinv(0.5 + level / 2.0);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::Degenerate, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  return gsl_stats_quantile_from_sorted_data(values.data(), 1, values.size(), q);
}

double mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return gsl_stats_mean(values.data(), 1, values.size());
}

double stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  return gsl_stats_sd(values.data(), 1, values.size());
}

}  // namespace hitlab

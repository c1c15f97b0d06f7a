#include "hitlab/hitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "hitlab/error.hpp"
#include "hitlab/stats.hpp"

namespace hitlab {

HittingRecord hitting_time(const SystemSpec& system, const PhasePoint& x, const Observable& f,
                           double r, std::uint64_t cap, std::uint64_t point_id) {
  return hitting_times(system, x, f, std::span<const double>(&r, 1), cap, point_id)[0];
}

std::vector<HittingRecord> hitting_times(const SystemSpec& system, const PhasePoint& x,
                                         const Observable& f, std::span<const double> radii,
                                         std::uint64_t cap, std::uint64_t point_id) {
  if (cap < 1) throw Error(ErrorCode::InvalidArgument, "hitting cap must be at least 1");
  for (std::size_t k = 1; k < radii.size(); ++k) {
    if (!(radii[k] < radii[k - 1])) throw Error(ErrorCode::InvalidArgument, "radii must decrease");
  }
  return first_hits(
      system, x, [&f](std::span<const double> c) { return f.evaluate(c); }, radii, cap, point_id);
}

ExponentEstimate fit_exponent(std::vector<HittingRecord> records, const ExponentOptions& options) {
  ExponentEstimate est;
  std::vector<double> x, y;
  std::size_t censored = 0;
  double floor_tau = 0.0;
  for (const auto& rec : records) {
    if (rec.censored) {
      ++censored;
      continue;
    }
    // Sublevels nest, so tau never decreases along a decreasing ladder.
    floor_tau = std::max(floor_tau, static_cast<double>(rec.tau));
    x.push_back(-std::log(rec.radius));
    y.push_back(std::log(floor_tau));
    est.pairs.emplace_back(x.back(), y.back());
  }
  est.censor_fraction = records.empty() ? 0.0 : static_cast<double>(censored) / records.size();
  est.records = std::move(records);
  if (x.size() < 2) {
    throw Error(ErrorCode::AllCensored,
                fmt::format("{} of {} rungs censored; no exponent can be fitted", censored, est.records.size()));
  }
  est.slope = fit_line(x, y).slope;
  est.window_width = options.window == 0 ? x.size() : std::clamp<std::size_t>(options.window, 2, x.size());
  const auto slopes = window_slopes(x, y, est.window_width);
  est.R_upper = *std::max_element(slopes.begin(), slopes.end());
  est.R_lower = *std::min_element(slopes.begin(), slopes.end());
  return est;
}

ExponentEstimate estimate_R(const SystemSpec& system, const PhasePoint& x, const Observable& f,
                            const RadiusLadder& ladder, std::uint64_t cap,
                            const ExponentOptions& options, std::uint64_t point_id) {
  return fit_exponent(hitting_times(system, x, f, ladder.radii(), cap, point_id), options);
}

std::uint64_t default_cap(double smallest_measure, double factor) {
  if (!(smallest_measure > 0.0)) return std::numeric_limits<std::uint32_t>::max();
  const double cap = std::ceil(factor / smallest_measure);
  return cap >= 1e15 ? static_cast<std::uint64_t>(1e15) : std::max<std::uint64_t>(1, static_cast<std::uint64_t>(cap));
}

// ---------------------------------------------------------------------------

double bc_radius(std::uint64_t i, double beta) {
  return i == 0 ? 1.0 : std::pow(static_cast<double>(i), -beta);
}

std::vector<BCCounter> bc_counter_series(const SystemSpec& system, const PhasePoint& x,
                                         const Observable& f, double beta, std::uint64_t k_max,
                                         double d_upper, const MeasureSource& source,
                                         std::span<const std::uint64_t> checkpoints) {
  if (k_max < 1000) throw Error(ErrorCode::InvalidArgument, "Borel-Cantelli series needs k_max >= 1000");
  if (!(beta > 0.0) || !(d_upper > 0.0 ? beta < 1.0 / d_upper : true)) {
    throw Error(ErrorCode::InvalidBeta,
                fmt::format("beta = {} must satisfy 0 < beta < 1/d_upper = {}", beta, 1.0 / d_upper));
  }

  std::vector<std::uint64_t> marks(checkpoints.begin(), checkpoints.end());
  if (marks.empty()) {
    for (std::uint64_t decade = 1; decade <= k_max; decade *= 10) {
      for (std::uint64_t m : {1, 2, 5}) {
        if (m * decade <= k_max) marks.push_back(m * decade);
      }
    }
  }
  marks.push_back(k_max);
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
  if (marks.back() > k_max) throw Error(ErrorCode::InvalidArgument, "checkpoint beyond k_max");

  // mu(S_{r_i}) either in closed form or from one empirical CDF of f.
  std::vector<double> cdf_values;
  if (source.kind == MeasureSource::Kind::MonteCarlo) {
    cdf_values = sample_observable(f, system, source.seed, source.samples, source.workers);
    std::sort(cdf_values.begin(), cdf_values.end());
  }
  auto measure = [&](double r) -> double {
    if (source.kind == MeasureSource::Kind::Exact) {
      const auto m = closed_form_measure(system, f, r);
      if (!m) throw Error(ErrorCode::InvalidArgument, "no closed-form measure for this system and observable");
      return *m;
    }
    const auto hits = std::upper_bound(cdf_values.begin(), cdf_values.end(), r) - cdf_values.begin();
    return static_cast<double>(hits) / static_cast<double>(cdf_values.size());
  };

  std::vector<BCCounter> out;
  out.reserve(marks.size());
  OrbitCursor cursor(system, x);
  std::uint64_t z = 0;
  double ez = 0.0;
  std::size_t next_mark = 0;
  for (std::uint64_t i = 0; i <= k_max; ++i) {
    if (i > 0) cursor.advance();
    const double r = bc_radius(i, beta);
    if (f.evaluate(cursor.coords()) <= r) ++z;
    ez += measure(r);
    if (next_mark < marks.size() && marks[next_mark] == i) {
      out.push_back(BCCounter{i, z, ez, ez > 0.0 ? static_cast<double>(z) / ez : 0.0});
      ++next_mark;
    }
  }
  return out;
}

}  // namespace hitlab

#include "hitlab/observed.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>

#include <Eigen/SVD>
#include <fmt/format.h>

#include "hitlab/error.hpp"
#include "hitlab/parallel.hpp"
#include "hitlab/stats.hpp"

namespace hitlab {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); }

void check_dims(const SystemSpec& system, const ObservationMap& F, std::span<const double> x0) {
  if (F.domain_dim() != system.dimension() || x0.size() != system.dimension()) {
    invalid(fmt::format("observation map on {} coordinates, system has {}", F.domain_dim(),
                        system.dimension()));
  }
}

}  // namespace

std::vector<HittingRecord> observed_hitting_times(const SystemSpec& system, const PhasePoint& x,
                                                  std::span<const double> x0,
                                                  const ObservationMap& F,
                                                  std::span<const double> radii, std::uint64_t cap,
                                                  std::uint64_t point_id) {
  check_dims(system, F, x0);
  if (cap < 1) invalid("hitting cap must be at least 1");
  for (std::size_t k = 1; k < radii.size(); ++k) {
    if (!(radii[k] < radii[k - 1])) invalid("radii must decrease");
  }
  if (F.is_constant()) {
    std::vector<HittingRecord> out;
    for (double r : radii) {
      out.push_back(r >= 0.0 ? HittingRecord{point_id, r, 1, false, cap, 0}
                             : HittingRecord{point_id, r, cap, true, cap, 0});
    }
    return out;
  }
  const auto target = F.evaluate(x0);
  std::array<double, kMaxCodomainDim> buf;
  const std::span<double> image(buf.data(), F.codomain_dim());
  return first_hits(
      system, x,
      [&](std::span<const double> c) {
        F.evaluate(c, image);
        return F.distance(image, target);
      },
      radii, cap, point_id);
}

HittingRecord observed_hitting_time(const SystemSpec& system, const PhasePoint& x,
                                    std::span<const double> x0, const ObservationMap& F, double r,
                                    std::uint64_t cap, std::uint64_t point_id) {
  return observed_hitting_times(system, x, x0, F, std::span<const double>(&r, 1), cap, point_id)[0];
}

DimensionEstimate pushforward_dimension(const SystemSpec& system, const ObservationMap& F,
                                        std::span<const double> x0, const RadiusLadder& ladder,
                                        std::uint64_t seed, std::size_t samples,
                                        const EstimatorOptions& options) {
  check_dims(system, F, x0);
  return estimate_dimension(Observable::pushforward_from(F, x0), ladder, system, seed, samples, options);
}

std::vector<DimensionEstimate> pushforward_dimensions(const SystemSpec& system,
                                                      const ObservationMap& F,
                                                      std::span<const double> base_points,
                                                      const RadiusLadder& ladder,
                                                      std::uint64_t seed, std::size_t samples,
                                                      const EstimatorOptions& options) {
  const std::size_t d = system.dimension();
  if (F.domain_dim() != d || base_points.size() % d != 0) invalid("base points do not match the system dimension");
  if (samples < 100) invalid("measure estimation needs at least 100 samples");
  const std::size_t m = F.codomain_dim();
  const auto coords = sample_invariant_coords(system, seed, samples, options.workers);
  std::vector<double> images(samples * m);
  parallel_for(chunk_count(samples), options.workers, [&](std::size_t c) {
    const std::size_t end = std::min(samples, (c + 1) * kTallyChunk);
    for (std::size_t i = c * kTallyChunk; i < end; ++i) {
      F.evaluate(std::span(coords).subspan(i * d, d), std::span(images).subspan(i * m, m));
    }
  });
  const std::size_t points = base_points.size() / d;
  std::vector<std::optional<DimensionEstimate>> slots(points);
  const double z = z_for_confidence(options.confidence);
  const double n = static_cast<double>(samples);
  parallel_for(points, options.workers, [&](std::size_t p) {
    const auto target = F.evaluate(base_points.subspan(p * d, d));
    std::vector<double> dist(samples);
    for (std::size_t i = 0; i < samples; ++i) dist[i] = F.distance(std::span(images).subspan(i * m, m), target);
    std::sort(dist.begin(), dist.end());
    std::vector<MeasureEstimate> measures;
    for (double r : ladder.radii()) {
      const auto hits = std::upper_bound(dist.begin(), dist.end(), r) - dist.begin();
      const double q = static_cast<double>(hits) / n;
      measures.push_back(MeasureEstimate{q, z * std::sqrt(q * (1.0 - q) / n), samples, false});
    }
    slots[p] = fit_dimension(ladder.radii(), std::move(measures), options);
  });
  std::vector<DimensionEstimate> out;
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

RankReport jacobian_rank(const ObservationMap& F, std::span<const double> x, double h) {
  if (!(h >= 1e-8 && h <= 1e-2)) invalid(fmt::format("finite-difference step {} outside [1e-8, 1e-2]", h));
  if (x.size() != F.domain_dim()) invalid("base point dimension does not match the map");
  RankReport rep;
  rep.base_point.assign(x.begin(), x.end());
  rep.step = h;
  rep.rows = F.codomain_dim();
  rep.cols = F.domain_dim();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rep.rows),
                                            static_cast<Eigen::Index>(rep.cols));
  if (!F.is_constant()) {
    std::vector<double> plus(x.begin(), x.end()), minus(x.begin(), x.end());
    for (std::size_t j = 0; j < rep.cols; ++j) {
      plus[j] = x[j] + h;
      minus[j] = x[j] - h;
      const auto fp = F.evaluate(plus);
      const auto fm = F.evaluate(minus);
      for (std::size_t i = 0; i < rep.rows; ++i) {
        double diff = fp[i] - fm[i];
        // Projections land on the torus: difference through the nearest translate.
        if (F.periodic_codomain()) diff -= std::round(diff);
        J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = diff / (2.0 * h);
      }
      plus[j] = minus[j] = x[j];
    }
  }
  for (std::size_t i = 0; i < rep.rows; ++i) {
    for (std::size_t j = 0; j < rep.cols; ++j) {
      rep.jacobian.push_back(J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
  const auto& sv = svd.singularValues();
  rep.singular_values.assign(sv.data(), sv.data() + sv.size());
  const double smax = rep.singular_values.empty() ? 0.0 : rep.singular_values.front();
  rep.tolerance = std::max(1e-6, 1e-8 * smax);
  rep.rank = static_cast<std::size_t>(
      std::count_if(rep.singular_values.begin(), rep.singular_values.end(),
                    [&](double s) { return s > rep.tolerance; }));
  return rep;
}

}  // namespace hitlab

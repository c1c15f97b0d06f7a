#include "hitlab/flow.hpp"

#include <array>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "hitlab/error.hpp"
#include "hitlab/stats.hpp"

namespace hitlab {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); }

}  // namespace

std::vector<std::uint64_t> log_grid(std::uint64_t n_max, std::size_t per_decade) {
  if (n_max < 1 || per_decade < 1) invalid("log grid needs n_max >= 1 and per_decade >= 1");
  std::vector<std::uint64_t> out;
  const double top = std::log10(static_cast<double>(n_max));
  const auto steps = static_cast<std::size_t>(std::ceil(top * static_cast<double>(per_decade)));
  for (std::size_t i = 0; i <= steps; ++i) {
    const double e = std::min(top, static_cast<double>(i) / static_cast<double>(per_decade));
    const auto n = static_cast<std::uint64_t>(std::llround(std::pow(10.0, e)));
    if (out.empty() || n > out.back()) out.push_back(std::min(n, n_max));
  }
  if (out.back() != n_max) out.push_back(n_max);
  return out;
}

ApproachSeries approach_series(const SystemSpec& system, const ObservationMap& projection,
                               const PhasePoint& x, std::span<const double> p,
                               std::span<const std::uint64_t> n_grid) {
  if (!std::holds_alternative<ToralAutomorphism>(system.kind())) {
    invalid("the approach series is defined for toral automorphisms");
  }
  if (!std::holds_alternative<Projection>(projection.rule())) invalid("the approach series needs a projection map");
  if (projection.domain_dim() != system.dimension()) invalid("projection does not match the system dimension");
  if (p.size() != projection.codomain_dim()) {
    invalid(fmt::format("target has {} coordinates, projection has {}", p.size(), projection.codomain_dim()));
  }
  if (n_grid.empty() || n_grid.front() < 1) invalid("grid must start at n >= 1");
  for (std::size_t i = 1; i < n_grid.size(); ++i) {
    if (!(n_grid[i] > n_grid[i - 1])) invalid("grid must increase");
  }

  ApproachSeries out;
  out.target.assign(p.begin(), p.end());
  out.n.assign(n_grid.begin(), n_grid.end());
  OrbitCursor cursor(system, x);
  std::array<double, kMaxCodomainDim> buf;
  const std::span<double> image(buf.data(), projection.codomain_dim());
  double best = std::numeric_limits<double>::infinity();
  for (std::uint64_t target_n : n_grid) {
    while (cursor.steps() < target_n) {
      cursor.advance();
      projection.evaluate(cursor.coords(), image);
      best = std::min(best, projection.distance(image, p));
    }
    out.d.push_back(best);
  }

  // Tail window: the largest decade of n. Grid points with log n = 0 or
  // d_n = 0 carry no slope information.
  const double n_max = static_cast<double>(n_grid.back());
  std::vector<double> lx, ly, ratios;
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    const double n = static_cast<double>(n_grid[i]);
    if (n < n_max / 10.0 || n < 2.0 || !(out.d[i] > 0.0)) continue;
    if (lx.empty()) out.tail_first = i;
    lx.push_back(std::log(n));
    ly.push_back(-std::log(out.d[i]));
    ratios.push_back(ly.back() / lx.back());
  }
  if (lx.size() >= 2) out.exponent = std::max(0.0, fit_line(lx, ly).slope);
  if (!ratios.empty()) {
    out.tail_max_ratio = *std::max_element(ratios.begin(), ratios.end());
    out.tail_median_ratio = median(ratios);
  }
  return out;
}

}  // namespace hitlab

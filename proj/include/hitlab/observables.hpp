#pragma once

// Lipschitz observables f >= 0, their sublevel targets S_r = {f <= r}, and
// estimators for mu(S_r) and the sublevel dimension d(f).

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hitlab/dynamics.hpp"
#include "hitlab/observation.hpp"

namespace hitlab {

class Observable;

struct DistToPoint {
  std::vector<double> target;
};

struct DistToProjectedPoint {
  std::vector<std::size_t> coords;  // 0-based
  std::vector<double> target;
};

struct PushforwardDist {
  ObservationMap map;
  std::vector<double> image_target;
};

struct WeightedTerm {
  double weight = 1.0;
  std::shared_ptr<const Observable> f;
};

struct WeightedSum {
  std::vector<WeightedTerm> terms;
};

/// max(0, inner - offset): sublevels of positive measure at r = 0.
struct Thickened {
  std::shared_ptr<const Observable> inner;
  double offset = 0.0;
};

class Observable {
 public:
  using Rule = std::variant<DistToPoint, DistToProjectedPoint, PushforwardDist, WeightedSum, Thickened>;

  static Observable dist_to_point(std::vector<double> target);
  static Observable dist_to_projected(std::vector<std::size_t> coords, std::vector<double> target,
                                      std::size_t domain_dim);
  static Observable pushforward(ObservationMap map, std::vector<double> image_target);
  /// f(x) = dist(F(x), F(x0)).
  static Observable pushforward_from(ObservationMap map, std::span<const double> x0);
  static Observable weighted_sum(std::vector<WeightedTerm> terms);
  static Observable thickened(Observable inner, double offset);

  const Rule& rule() const { return rule_; }
  const std::string& label() const { return label_; }
  double lipschitz() const { return lipschitz_; }
  std::size_t domain_dim() const { return domain_dim_; }
  /// Upper bound for sup f over [0,1)^d.
  double sup_bound() const { return sup_bound_; }

  double evaluate(std::span<const double> x) const;
  double evaluate(const PhasePoint& x) const;

 private:
  Observable() = default;

  Rule rule_;
  std::string label_;
  double lipschitz_ = 1.0;
  std::size_t domain_dim_ = 1;
  double sup_bound_ = 0.0;
};

/// "dist:0.375", "dist:0.5,0.5", "projdist:1:0.5", "pushdist:proj1:0.5",
/// "fat:0.05:dist:0.5", "sum:0.5*dist:0.2;0.5*dist:0.7".
Observable parse_observable(std::string_view spec, std::size_t domain_dim);

double evaluate(const Observable& f, const PhasePoint& x);

/// Piecewise-linear interpolation between the indicators of S_r and
/// S_{r_prev}: 1 on S_r, 0 off S_{r_prev}. Requires 0 < r < r_prev.
double mollifier(const Observable& f, double r_prev, double r, const PhasePoint& x);
double mollifier_value(double f_value, double r_prev, double r);

// ---------------------------------------------------------------------------

class RadiusLadder {
 public:
  /// Throws ConfigInvalid (field "ladder") unless radii strictly decrease,
  /// stay positive and satisfy r_{k+1} > gap * r_k.
  explicit RadiusLadder(std::vector<double> radii, double gap = 0.25);

  /// r_k = 2^-e for e = first, first + step, ..., <= last.
  static RadiusLadder dyadic(double first_exponent, double last_exponent, double step = 1.0,
                             double gap = 0.25);

  std::span<const double> radii() const { return radii_; }
  std::size_t size() const { return radii_.size(); }
  double operator[](std::size_t k) const { return radii_[k]; }
  double gap() const { return gap_; }

 private:
  std::vector<double> radii_;
  double gap_;
};

struct MeasureEstimate {
  double value = 0.0;
  double half_width = 0.0;
  std::uint64_t samples = 0;
  bool exact = false;

  double lower() const;
  double upper() const;
};

struct DimensionEstimate {
  double d_upper = 0.0;
  double d_lower = 0.0;
  double slope = 0.0;         // least squares over every usable rung
  double slope_stderr = 0.0;
  std::size_t window_first = 0;  // ladder indices of the fit window
  std::size_t window_last = 0;
  std::size_t window_width = 0;  // sliding-window width in rungs
  std::vector<double> radii;
  std::vector<MeasureEstimate> measures;
  std::vector<bool> used;
  bool exact = false;
};

struct EstimatorOptions {
  double confidence = 0.95;
  std::size_t window = 4;
  double min_expected_hits = 20.0;
  unsigned workers = 0;
};

/// Closed-form mu(S_r) for Lebesgue systems and distance-type observables.
std::optional<double> closed_form_measure(const SystemSpec& system, const Observable& f, double r);

MeasureEstimate estimate_measure(const Observable& f, double r, const SystemSpec& system,
                                 std::uint64_t seed, std::size_t samples,
                                 const EstimatorOptions& options = {});

/// mu(S_r) for every radius from one shared sample of size `samples`.
std::vector<MeasureEstimate> estimate_measures(const Observable& f, std::span<const double> radii,
                                               const SystemSpec& system, std::uint64_t seed,
                                               std::size_t samples,
                                               const EstimatorOptions& options = {});

/// Observable values on invariant samples, in sample order.
std::vector<double> sample_observable(const Observable& f, const SystemSpec& system,
                                      std::uint64_t seed, std::size_t samples, unsigned workers = 0);

DimensionEstimate estimate_dimension(const Observable& f, const RadiusLadder& ladder,
                                     const SystemSpec& system, std::uint64_t seed,
                                     std::size_t samples_per_rung,
                                     const EstimatorOptions& options = {});

/// Slope fit over precomputed rung measures. Throws DegenerateLadder when
/// fewer than four rungs are usable.
DimensionEstimate fit_dimension(std::span<const double> radii,
                                std::vector<MeasureEstimate> measures,
                                const EstimatorOptions& options = {});

}  // namespace hitlab

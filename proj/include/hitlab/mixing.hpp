#pragma once

// Correlation estimates for Lipschitz test functions, decay-class fits and the
// intersection bound for mollified sublevel targets.

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
#include "hitlab/observables.hpp"

namespace hitlab {

struct LipschitzNorm {
  double sup = 0.0;
  double lip = 0.0;
  double total() const { return sup + lip; }
};

class TestFunction {
 public:
  struct FromObservable {
    std::shared_ptr<const Observable> f;
  };
  /// cos(2 pi freq x_coord).
  struct Cosine {
    std::size_t coord = 0;
    int freq = 1;
  };
  /// Sawtooth x_coord rising on [0, 1 - 1/steepness], falling linearly back to
  /// 0 on the rest. Continuous on the circle with Lipschitz constant
  /// `steepness`.
  struct Ramp {
    std::size_t coord = 0;
    double steepness = 64.0;
  };
  struct Constant {
    double value = 0.0;
  };
  using Rule = std::variant<FromObservable, Cosine, Ramp, Constant>;

  static TestFunction observable(Observable f);
  static TestFunction cosine(std::size_t coord, int freq);
  static TestFunction ramp(std::size_t coord, double steepness);
  static TestFunction constant(double value);

  const Rule& rule() const { return rule_; }
  const std::string& label() const { return label_; }
  LipschitzNorm norm() const { return norm_; }
  double evaluate(std::span<const double> x) const;

 private:
  explicit TestFunction(Rule rule);
  Rule rule_;
  std::string label_;
  LipschitzNorm norm_;
};

/// "cos:1:2", "ramp:1:64", "const:0.5", or any observable rule.
TestFunction parse_test_function(std::string_view spec, std::size_t domain_dim);

struct CorrelationSeries {
  std::vector<std::uint64_t> lags;
  std::vector<double> values;      // |covariance|
  std::vector<double> covariance;  // signed
  std::vector<double> half_widths;
  LipschitzNorm phi_norm;
  LipschitzNorm psi_norm;
  std::uint64_t samples = 0;
};

struct CorrelationOptions {
  double confidence = 0.95;
  unsigned workers = 0;
};

/// |E[phi(T^n x) psi(x)] - E[phi] E[psi]| per lag over `samples` invariant
/// draws. Lags must strictly increase; samples >= 1000.
CorrelationSeries estimate_correlation(const SystemSpec& system, const TestFunction& phi,
                                       const TestFunction& psi, std::span<const std::uint64_t> lags,
                                       std::uint64_t seed, std::size_t samples,
                                       const CorrelationOptions& options = {});

enum class DecayClass { Exponential, Polynomial, Inconclusive };
std::string to_string(DecayClass c);

struct DecayFit {
  DecayClass decay_class = DecayClass::Inconclusive;
  double rate = 0.0;        // sigma for exponential, alpha for polynomial
  double log_prefactor = 0.0;
  double exp_residual = 0.0;   // rms residual of each candidate model
  double poly_residual = 0.0;
  double max_abs_residual = 0.0;  // of the selected model
  std::uint64_t first_lag = 0;
  std::uint64_t last_lag = 0;
  std::size_t usable = 0;
  double norm_product = 1.0;

  /// Fitted value at lag n inflated by the largest fit residual.
  double envelope(double n) const;
  /// envelope(n) / (|phi| |psi|): the decay function Phi.
  double phi_hat(double n) const;
};

/// Log-linear fits against n (exponential) and log n (polynomial) over the
/// leading run of lags whose values exceed 3 half-widths. No such lag gives
/// Inconclusive; one to five throw Degenerate.
DecayFit fit_decay(const CorrelationSeries& series);

/// Decay envelope from the ramp/ramp pair (steepness 1024) in the first coordinate, lags 1..30.
DecayFit reference_decay(const SystemSpec& system, std::uint64_t seed, std::size_t samples,
                         const CorrelationOptions& options = {});

struct IntersectionCheck {
  std::size_t k = 0;
  std::size_t j = 0;
  MeasureEstimate lhs;
  double product = 0.0;           // mu(S_{r_{k-1}}) mu(S_{r_{j-1}})
  double correlation_term = 0.0;  // 4 l^2 Phi(k-j) / ((r_{k-1}-r_k)(r_{j-1}-r_j))
  double rhs = 0.0;
  bool holds = false;             // lhs <= rhs + lhs half-width
};

/// mu{T^k x in S_{r_k}, T^j x in S_{r_j}} against the mollified bound, for
/// ladder indices k > j >= 1. Throws NoDecayFit unless `decay` is exponential
/// or polynomial.
IntersectionCheck intersection_bound_check(const SystemSpec& system, const Observable& f,
                                           const RadiusLadder& ladder, std::size_t k,
                                           std::size_t j, std::uint64_t seed, std::size_t samples,
                                           const DecayFit& decay,
                                           const EstimatorOptions& options = {});

}  // namespace hitlab

#pragma once

// Observation maps F: T^d -> R^m for observed systems. Maps are evaluated on
// the [0,1)^d representatives of torus points.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace hitlab {

inline constexpr std::size_t kMaxCodomainDim = 8;

struct Projection {
  std::vector<std::size_t> coords;  // 0-based
};

struct LinearMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> matrix;  // row-major
};

enum class SmoothKind {
  Sine,   // x -> sin(2 pi x_1)
  Twist,  // (x, y) -> (x + sin(2 pi y) / 4, y)
  Graph,  // (x, y) -> (x, sin(2 pi x))
};

struct SmoothMap {
  SmoothKind kind = SmoothKind::Sine;
};

struct ConstantMap {
  std::vector<double> value;
};

class ObservationMap {
 public:
  using Rule = std::variant<Projection, LinearMap, SmoothMap, ConstantMap>;

  static ObservationMap projection(std::vector<std::size_t> coords, std::size_t domain_dim);
  static ObservationMap identity(std::size_t dim);
  static ObservationMap linear(std::size_t rows, std::size_t cols, std::vector<double> matrix);
  static ObservationMap smooth(SmoothKind kind, std::size_t domain_dim);
  static ObservationMap constant(std::vector<double> value, std::size_t domain_dim);

  const Rule& rule() const { return rule_; }
  const std::string& label() const { return label_; }
  std::size_t domain_dim() const { return domain_dim_; }
  std::size_t codomain_dim() const { return codomain_dim_; }
  double lipschitz() const { return lipschitz_; }
  /// Projections land on a torus and use the quotient metric; every other
  /// map uses the flat Euclidean metric on R^m.
  bool periodic_codomain() const { return std::holds_alternative<Projection>(rule_); }
  bool is_constant() const { return std::holds_alternative<ConstantMap>(rule_); }

  void evaluate(std::span<const double> x, std::span<double> out) const;
  std::vector<double> evaluate(std::span<const double> x) const;
  double distance(std::span<const double> a, std::span<const double> b) const;

 private:
  ObservationMap() = default;

  Rule rule_;
  std::string label_;
  std::size_t domain_dim_ = 1;
  std::size_t codomain_dim_ = 1;
  double lipschitz_ = 0.0;
};

/// "proj:1", "proj:1,2", "proj1", "id", "linear:[[1,0],[2,0]]", "const:0.5",
/// "smooth:sine", "smooth:twist", "smooth:graph". Coordinates are 1-based.
ObservationMap parse_observation_map(std::string_view spec, std::size_t domain_dim);

}  // namespace hitlab

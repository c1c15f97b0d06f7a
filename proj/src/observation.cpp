#include "hitlab/observation.hpp"

#include <Eigen/SVD>
#include "json.hpp"

#include <cmath>
#include <numbers>

#include "hitlab/dynamics.hpp"
#include "hitlab/error.hpp"
#include "text.hpp"

namespace hitlab {

namespace {

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); }

std::string join_coords(const std::vector<std::size_t>& coords) {
  std::string out;
  for (std::size_t i = 0; i < coords.size(); ++i) out += (i ? "," : "") + std::to_string(coords[i] + 1);
  return out;
}

}  // namespace

ObservationMap ObservationMap::projection(std::vector<std::size_t> coords, std::size_t domain_dim) {
  if (coords.empty() || coords.size() > kMaxCodomainDim) invalid("projection needs 1..8 coordinates");
  for (auto c : coords) {
    if (c >= domain_dim) invalid("projection coordinate outside the domain");
  }
  ObservationMap m;
  m.label_ = "proj:" + join_coords(coords);
  m.domain_dim_ = domain_dim;
  m.codomain_dim_ = coords.size();
  m.lipschitz_ = 1.0;
  m.rule_ = Projection{std::move(coords)};
  return m;
}

ObservationMap ObservationMap::identity(std::size_t dim) {
  std::vector<std::size_t> all(dim);
  for (std::size_t i = 0; i < dim; ++i) all[i] = i;
  return projection(std::move(all), dim);
}

ObservationMap ObservationMap::linear(std::size_t rows, std::size_t cols, std::vector<double> matrix) {
  if (rows == 0 || rows > kMaxCodomainDim || cols == 0) invalid("linear map needs 1..8 rows and >= 1 column");
  if (matrix.size() != rows * cols) invalid("linear map entry count does not match its shape");
  Eigen::MatrixXd a(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) a(i, j) = matrix[i * cols + j];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  ObservationMap m;
  nlohmann::json rows_json = nlohmann::json::array();
  for (std::size_t i = 0; i < rows; ++i) {
    rows_json.push_back(std::vector<double>(matrix.begin() + i * cols, matrix.begin() + (i + 1) * cols));
  }
  m.label_ = "linear:" + rows_json.dump();
  m.domain_dim_ = cols;
  m.codomain_dim_ = rows;
  m.lipschitz_ = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  m.rule_ = LinearMap{rows, cols, std::move(matrix)};
  return m;
}

ObservationMap ObservationMap::smooth(SmoothKind kind, std::size_t domain_dim) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  ObservationMap m;
  m.domain_dim_ = domain_dim;
  switch (kind) {
    case SmoothKind::Sine:
      m.label_ = "smooth:sine";
      m.codomain_dim_ = 1;
      m.lipschitz_ = two_pi;
      break;
    case SmoothKind::Twist: {
      if (domain_dim < 2) invalid("smooth:twist needs a 2-dimensional domain");
      m.label_ = "smooth:twist";
      m.codomain_dim_ = 2;
      // Largest singular value of [[1, a], [0, 1]] with a = pi / 2.
      const double a = std::numbers::pi / 2.0;
      m.lipschitz_ = (a + std::sqrt(a * a + 4.0)) / 2.0;
      break;
    }
    case SmoothKind::Graph:
      if (domain_dim < 2) invalid("smooth:graph needs a 2-dimensional domain");
      m.label_ = "smooth:graph";
      m.codomain_dim_ = 2;
      m.lipschitz_ = std::sqrt(1.0 + two_pi * two_pi);
      break;
  }
  m.rule_ = SmoothMap{kind};
  return m;
}

ObservationMap ObservationMap::constant(std::vector<double> value, std::size_t domain_dim) {
  if (value.empty() || value.size() > kMaxCodomainDim) invalid("constant map needs 1..8 values");
  ObservationMap m;
  std::string label = "const:";
  for (std::size_t i = 0; i < value.size(); ++i) label += (i ? "," : "") + fmt::format("{}", value[i]);
  m.label_ = label;
  m.domain_dim_ = domain_dim;
  m.codomain_dim_ = value.size();
  m.lipschitz_ = 0.0;
  m.rule_ = ConstantMap{std::move(value)};
  return m;
}

void ObservationMap::evaluate(std::span<const double> x, std::span<double> out) const {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::visit(
      [&](const auto& r) {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, Projection>) {
          for (std::size_t i = 0; i < r.coords.size(); ++i) out[i] = x[r.coords[i]];
        } else if constexpr (std::is_same_v<R, LinearMap>) {
          for (std::size_t i = 0; i < r.rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < r.cols; ++j) s += r.matrix[i * r.cols + j] * x[j];
            out[i] = s;
          }
        } else if constexpr (std::is_same_v<R, SmoothMap>) {
          switch (r.kind) {
            case SmoothKind::Sine:
              out[0] = std::sin(two_pi * x[0]);
              break;
            case SmoothKind::Twist:
              out[0] = x[0] + 0.25 * std::sin(two_pi * x[1]);
              out[1] = x[1];
              break;
            case SmoothKind::Graph:
              out[0] = x[0];
              out[1] = std::sin(two_pi * x[0]);
              break;
          }
        } else {
          std::copy(r.value.begin(), r.value.end(), out.begin());
        }
      },
      rule_);
}

std::vector<double> ObservationMap::evaluate(std::span<const double> x) const {
  std::vector<double> out(codomain_dim_);
  evaluate(x, out);
  return out;
}

double ObservationMap::distance(std::span<const double> a, std::span<const double> b) const {
  if (is_constant()) return 0.0;
  return periodic_codomain() ? torus_distance(a, b) : euclidean_distance(a, b);
}

ObservationMap parse_observation_map(std::string_view spec, std::size_t domain_dim) {
  spec = text::trim(spec);
  if (spec == "id") return ObservationMap::identity(domain_dim);
  if (spec.starts_with("proj:")) return ObservationMap::projection(text::to_coords(spec.substr(5), domain_dim), domain_dim);
  if (spec.starts_with("proj")) return ObservationMap::projection(text::to_coords(spec.substr(4), domain_dim), domain_dim);
  if (spec.starts_with("const:")) return ObservationMap::constant(text::to_doubles(spec.substr(6), "constant value"), domain_dim);
  if (spec == "smooth:sine") return ObservationMap::smooth(SmoothKind::Sine, domain_dim);
  if (spec == "smooth:twist") return ObservationMap::smooth(SmoothKind::Twist, domain_dim);
  if (spec == "smooth:graph") return ObservationMap::smooth(SmoothKind::Graph, domain_dim);
  if (spec.starts_with("linear:")) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(spec.substr(7));
    } catch (const nlohmann::json::exception& e) {
      invalid(fmt::format("linear map '{}' is not a JSON matrix: {}", spec, e.what()));
    }
    if (!j.is_array() || j.empty() || !j[0].is_array()) invalid("linear map must be a list of rows");
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].size();
    std::vector<double> m;
    for (const auto& row : j) {
      if (!row.is_array() || row.size() != cols) invalid("linear map rows must have equal length");
      for (const auto& v : row) {
        if (!v.is_number()) invalid("linear map entries must be numbers");
        m.push_back(v.get<double>());
      }
    }
    if (cols != domain_dim) invalid(fmt::format("linear map has {} columns, domain has {}", cols, domain_dim));
    return ObservationMap::linear(rows, cols, std::move(m));
  }
  invalid(fmt::format("unknown observation map '{}'", spec));
}

}  // namespace hitlab

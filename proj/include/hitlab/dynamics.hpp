#pragma once

// Catalog of measure-preserving maps on tori with exact orbit iteration.
//
// Three point representations are used:
//   * fixed-point fractions with B bits per coordinate (toral automorphisms,
//     rotations, the identity test double); integer-linear maps and
//     additions are done modulo 2^B, so orbits carry no rounding error;
//   * bit streams for the doubling map, where T^n(x) is the 64-bit window
//     of the binary expansion at offset n;
//   * plain doubles for the Manneville-Pomeau map (float engine).

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace hitlab {

inline constexpr int kDefaultPrecisionBits = 512;

enum class MixingClass { Exponential, Polynomial, None };
std::string_view to_string(MixingClass c);

struct OrbitBudget {
  std::uint64_t max_steps = 0;
  int precision_bits = kDefaultPrecisionBits;
  int guard_bits = 0;
};

// ---------------------------------------------------------------------------
// Bit sources for the doubling map. Word 0 holds binary digits 1..64 of the
// fraction, most significant first.

/// Explicit leading words followed by the counter stream `key`.
struct RandomBits {
  std::uint64_t key = 0;
  std::vector<std::uint64_t> head;
  bool operator==(const RandomBits&) const = default;
};

/// Binary expansion of numerator/denominator, numerator < denominator.
struct RationalBits {
  std::uint64_t numerator = 0;
  std::uint64_t denominator = 1;
  bool operator==(const RationalBits&) const = default;
};

/// A dyadic fraction: `words` followed by zeros. When `budgeted`, windows past
/// offset precision_bits - guard_bits are refused.
struct FiniteBits {
  std::vector<std::uint64_t> words;
  int precision_bits = 64;
  int guard_bits = 0;
  bool budgeted = false;
  bool operator==(const FiniteBits&) const = default;
};

using BitSource = std::variant<RandomBits, RationalBits, FiniteBits>;

/// Digits offset+1 .. offset+64 of the source. Throws BudgetExhausted.
std::uint64_t read_window(const BitSource& source, std::uint64_t offset);

// ---------------------------------------------------------------------------

struct FixedCoords {
  int bits = kDefaultPrecisionBits;
  std::size_t limbs_per_coord = 8;
  /// Coordinate-major, little-endian limbs: limbs[c * L + L - 1] is the most
  /// significant word of coordinate c.
  std::vector<std::uint64_t> limbs;
  bool operator==(const FixedCoords&) const = default;
};

struct StreamCoord {
  std::shared_ptr<const BitSource> source;
  std::uint64_t offset = 0;
  /// Compares the represented sources by value.
  bool operator==(const StreamCoord& other) const;
};

struct FloatCoords {
  std::vector<double> values;
  bool operator==(const FloatCoords&) const = default;
};

class PhasePoint {
 public:
  using Rep = std::variant<FixedCoords, StreamCoord, FloatCoords>;

  explicit PhasePoint(Rep rep) : rep_(std::move(rep)) {}

  std::size_t dimension() const;
  double coord(std::size_t i) const;
  std::vector<double> coords() const;
  void coords(std::span<double> out) const;

  const Rep& rep() const { return rep_; }

  /// Bit-for-bit equality of the represented points.
  bool operator==(const PhasePoint& other) const;

 private:
  Rep rep_;
};

// ---------------------------------------------------------------------------

struct Doubling {
  enum class Engine { Reservoir, FixedPoint };
  Engine engine = Engine::Reservoir;
};

struct ToralAutomorphism {
  std::size_t dim = 2;
  std::vector<std::int64_t> matrix;   // row-major dim x dim, det = +-1
  std::vector<std::int64_t> inverse;  // integer inverse, same layout
};

struct CircleRotation {
  std::vector<std::uint64_t> alpha;  // little-endian limbs at system precision
  std::string label;
};

struct MannevillePomeau {
  double s = 0.5;
};

/// T(x) = x. Not in the public catalog; used as a test double.
struct IdentityMap {
  std::size_t dim = 1;
};

struct SamplerSettings {
  std::uint64_t burn_in = 10'000;
  std::uint64_t stride = 10;
};

class SystemSpec {
 public:
  using Kind = std::variant<Doubling, ToralAutomorphism, CircleRotation,
                            MannevillePomeau, IdentityMap>;

  static SystemSpec doubling(Doubling::Engine engine = Doubling::Engine::Reservoir,
                             int precision_bits = kDefaultPrecisionBits, int guard_bits = 0);
  static SystemSpec toral(std::size_t dim, std::vector<std::int64_t> matrix,
                          int precision_bits = kDefaultPrecisionBits);
  static SystemSpec cat(int precision_bits = kDefaultPrecisionBits);
  /// alpha: decimal literal in [0,1), "golden" or "liouville".
  static SystemSpec rotation(std::string_view alpha, int precision_bits = kDefaultPrecisionBits);
  static SystemSpec rotation_fraction(std::uint64_t numerator, std::uint64_t denominator,
                                      int precision_bits = kDefaultPrecisionBits);
  static SystemSpec manneville_pomeau(double s, SamplerSettings sampler = {});
  static SystemSpec identity(std::size_t dim, int precision_bits = kDefaultPrecisionBits);

  const std::string& id() const { return id_; }
  const Kind& kind() const { return kind_; }
  std::size_t dimension() const { return dimension_; }
  MixingClass mixing_class() const { return mixing_; }
  int precision_bits() const { return precision_bits_; }
  int guard_bits() const { return guard_bits_; }
  std::size_t limbs_per_coord() const { return limbs_; }
  const SamplerSettings& sampler() const { return sampler_; }
  void set_sampler(SamplerSettings s) { sampler_ = s; }

  /// Invariant measure is Lebesgue on the torus.
  bool lebesgue() const;
  /// False only for the double-precision Manneville-Pomeau engine.
  bool exact_engine() const;

  OrbitBudget budget() const;

 private:
  SystemSpec() = default;

  std::string id_;
  Kind kind_;
  std::size_t dimension_ = 1;
  MixingClass mixing_ = MixingClass::None;
  int precision_bits_ = kDefaultPrecisionBits;
  int guard_bits_ = 0;
  std::size_t limbs_ = 8;
  SamplerSettings sampler_;
};

/// Catalog ids: "doubling", "cat", "rotation:<decimal|golden|liouville>",
/// "mp:<s>", plus "toral:<row-major entries>" and "doubling:fixed".
SystemSpec parse_system(std::string_view id, int precision_bits = kDefaultPrecisionBits);

// ---------------------------------------------------------------------------
// Point construction.

struct Fraction {
  std::uint64_t numerator = 0;
  std::uint64_t denominator = 1;
};

/// Exact rational point (floor to B bits for fixed-point systems).
PhasePoint point_from_fractions(const SystemSpec& system, std::span<const Fraction> coords);
PhasePoint point_from_fraction(const SystemSpec& system, std::uint64_t num, std::uint64_t den);

/// Point whose coordinates are the given doubles, bits below 2^-64 dropped,
/// zeros beyond.
PhasePoint point_from_doubles(const SystemSpec& system, std::span<const double> coords);

/// Point whose leading 64 bits per coordinate are `words` and whose lower bits
/// come from the counter stream `tail_key`.
PhasePoint point_with_leading_words(const SystemSpec& system,
                                    std::span<const std::uint64_t> words,
                                    std::uint64_t tail_key);

// ---------------------------------------------------------------------------
// Operations.

PhasePoint step(const SystemSpec& system, const PhasePoint& p);
PhasePoint orbit_window(const SystemSpec& system, const PhasePoint& p, std::uint64_t n);
/// T^-1 for the invertible catalog maps (toral, rotation, identity).
PhasePoint step_inverse(const SystemSpec& system, const PhasePoint& p);

/// Sample `index` of the invariant-measure stream under `seed`. Only for
/// Lebesgue systems; the Manneville-Pomeau sampler is sequential.
PhasePoint invariant_sample(const SystemSpec& system, std::uint64_t seed, std::uint64_t index);
std::vector<PhasePoint> sample_invariant(const SystemSpec& system, std::uint64_t seed,
                                         std::size_t count);
/// Start points for per-point experiments. Equals sample_invariant for
/// Lebesgue systems; Manneville-Pomeau points come from independent chains
/// (uniform start, burn-in steps) so their forward orbits do not overlap.
std::vector<PhasePoint> start_points(const SystemSpec& system, std::uint64_t seed,
                                     std::size_t count);
/// Coordinates of sample_invariant(system, seed, count), flattened row-major.
std::vector<double> sample_invariant_coords(const SystemSpec& system, std::uint64_t seed,
                                            std::size_t count, unsigned workers = 0);

/// In-place orbit iteration for hot loops. Holds a copy of the system.
class OrbitCursor {
 public:
  OrbitCursor(const SystemSpec& system, const PhasePoint& start);

  void advance();
  std::uint64_t steps() const { return steps_; }
  std::span<const double> coords() const { return coords_; }
  PhasePoint point() const;

 private:
  void refresh();

  SystemSpec system_;
  PhasePoint::Rep state_;
  std::vector<std::uint64_t> scratch_;
  std::vector<double> coords_;
  std::uint64_t steps_ = 0;
  std::uint64_t rational_rem_ = 0;
};

// ---------------------------------------------------------------------------

/// Quotient metric on the torus: per-coordinate min over integer translates,
/// then Euclidean norm.
double torus_distance(std::span<const double> a, std::span<const double> b);
double euclidean_distance(std::span<const double> a, std::span<const double> b);

}  // namespace hitlab

#include "hitlab/dynamics.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "hitlab/error.hpp"
#include "hitlab/parallel.hpp"
#include "hitlab/random.hpp"

namespace hitlab {

using u128 = unsigned __int128;
using i128 = __int128;

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BudgetExhausted: return "budget-exhausted";
    case ErrorCode::ConfigInvalid: return "config-invalid";
    case ErrorCode::RejectionStall: return "rejection-stall";
    case ErrorCode::DegenerateLadder: return "degenerate-ladder";
    case ErrorCode::AllCensored: return "all-censored";
    case ErrorCode::InvalidBeta: return "invalid-beta";
    case ErrorCode::NoDecayFit: return "no-decay-fit";
    case ErrorCode::Degenerate: return "degenerate";
    case ErrorCode::SchemaMismatch: return "schema-mismatch";
    case ErrorCode::InvalidArgument: return "invalid-argument";
  }
  return "unknown";
}

std::string_view to_string(MixingClass c) {
  switch (c) {
    case MixingClass::Exponential: return "exponential";
    case MixingClass::Polynomial: return "polynomial";
    case MixingClass::None: return "none";
  }
  return "none";
}

namespace {

constexpr std::int64_t kMaxMatrixEntry = std::int64_t{1} << 20;
constexpr std::size_t kMaxToralDim = 8;

[[noreturn]] void invalid(const std::string& msg) {
  throw Error(ErrorCode::InvalidArgument, msg);
}

std::size_t limbs_for(int bits) { return static_cast<std::size_t>((bits + 63) / 64); }

void check_precision(int bits) {
  if (bits < 64 || bits > 65536) invalid(fmt::format("precision bits {} outside [64, 65536]", bits));
}

/// Zero the digits below 2^-bits in a little-endian limb array.
void mask_low(std::span<std::uint64_t> limbs, int bits) {
  const int low = static_cast<int>(64 * limbs.size()) - bits;
  if (low > 0) limbs[0] &= ~((std::uint64_t{1} << low) - 1);
}

/// floor(value * 2^(64 L)) mod 2^(64 L), little-endian, masked to `bits`.
std::vector<std::uint64_t> limbs_from_mpz(mpz_class scaled, std::size_t L, int bits) {
  mpz_class modulus = mpz_class(1) << static_cast<mp_bitcnt_t>(64 * L);
  scaled %= modulus;
  if (scaled < 0) scaled += modulus;
  std::vector<std::uint64_t> out(L, 0);
  std::size_t written = 0;
  mpz_export(out.data(), &written, -1, sizeof(std::uint64_t), 0, 0, scaled.get_mpz_t());
  mask_low(out, bits);
  return out;
}

std::vector<std::uint64_t> limbs_from_ratio(const mpz_class& num, const mpz_class& den,
                                            std::size_t L, int bits) {
  mpz_class scaled = (num << static_cast<mp_bitcnt_t>(64 * L));
  mpz_fdiv_q(scaled.get_mpz_t(), scaled.get_mpz_t(), den.get_mpz_t());
  return limbs_from_mpz(scaled, L, bits);
}

std::uint64_t word_from_double(double x) {
  x -= std::floor(x);
  if (!(x >= 0.0 && x < 1.0)) x = 0.0;
  return static_cast<std::uint64_t>(std::ldexp(x, 64));
}

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>((u128{a} * b) % m);
}

std::uint64_t pow2mod(std::uint64_t e, std::uint64_t m) {
  std::uint64_t result = 1 % m;
  std::uint64_t base = 2 % m;
  while (e) {
    if (e & 1) result = mulmod(result, base, m);
    base = mulmod(base, base, m);
    e >>= 1;
  }
  return result;
}

std::uint64_t rational_word(std::uint64_t rem, std::uint64_t den) {
  return static_cast<std::uint64_t>((u128{rem} << 64) / den);
}

std::uint64_t source_word(const BitSource& source, std::uint64_t j) {
  return std::visit(
      [j](const auto& s) -> std::uint64_t {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, RandomBits>) {
          return j < s.head.size() ? s.head[j] : random_word(s.key, j);
        } else if constexpr (std::is_same_v<S, FiniteBits>) {
          return j < s.words.size() ? s.words[j] : 0;
        } else {
          return rational_word(mulmod(s.numerator, pow2mod(64 * j, s.denominator), s.denominator),
                               s.denominator);
        }
      },
      source);
}

/// out = M * in (mod 2^(64 L)), per coordinate.
void apply_matrix(std::span<const std::int64_t> m, std::size_t d, std::size_t L,
                  const std::uint64_t* in, std::uint64_t* out) {
  for (std::size_t i = 0; i < d; ++i) {
    i128 carry = 0;
    for (std::size_t l = 0; l < L; ++l) {
      i128 acc = carry;
      for (std::size_t j = 0; j < d; ++j) {
        acc += static_cast<i128>(m[i * d + j]) * static_cast<i128>(in[j * L + l]);
      }
      out[i * L + l] = static_cast<std::uint64_t>(acc);
      carry = acc >> 64;
    }
  }
}

void add_limbs(std::uint64_t* x, const std::uint64_t* a, std::size_t L) {
  u128 carry = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const u128 s = u128{x[l]} + a[l] + carry;
    x[l] = static_cast<std::uint64_t>(s);
    carry = s >> 64;
  }
}

void sub_limbs(std::uint64_t* x, const std::uint64_t* a, std::size_t L) {
  std::uint64_t borrow = 0;
  for (std::size_t l = 0; l < L; ++l) {
    const u128 rhs = u128{a[l]} + borrow;
    borrow = u128{x[l]} < rhs ? 1 : 0;
    x[l] = static_cast<std::uint64_t>(u128{x[l]} - rhs);
  }
}

std::vector<std::uint64_t> scale_limbs(std::span<const std::uint64_t> a, std::uint64_t n) {
  std::vector<std::uint64_t> out(a.size());
  u128 carry = 0;
  for (std::size_t l = 0; l < a.size(); ++l) {
    const u128 p = u128{a[l]} * n + carry;
    out[l] = static_cast<std::uint64_t>(p);
    carry = p >> 64;
  }
  return out;
}

double mp_map(double x, double s) {
  double y = x + std::pow(x, 1.0 + s);
  if (y >= 1.0) y -= 1.0;
  // An exact zero is a spurious fixed point of the float engine.
  if (y <= 0.0) y = 0x1p-53;
  return y;
}

mpz_class determinant(std::size_t d, std::span<const std::int64_t> m) {
  // Bareiss fraction-free elimination.
  std::vector<mpz_class> a(d * d);
  for (std::size_t i = 0; i < d * d; ++i) a[i] = static_cast<long>(m[i]);
  mpz_class sign = 1, prev = 1;
  for (std::size_t k = 0; k + 1 < d; ++k) {
    if (a[k * d + k] == 0) {
      std::size_t swap_row = k + 1;
      while (swap_row < d && a[swap_row * d + k] == 0) ++swap_row;
      if (swap_row == d) return 0;
      for (std::size_t c = 0; c < d; ++c) std::swap(a[k * d + c], a[swap_row * d + c]);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < d; ++i) {
      for (std::size_t j = k + 1; j < d; ++j) {
        a[i * d + j] = (a[i * d + j] * a[k * d + k] - a[i * d + k] * a[k * d + j]) / prev;
      }
    }
    prev = a[k * d + k];
  }
  return sign * a[(d - 1) * d + (d - 1)];
}

std::vector<std::int64_t> integer_inverse(std::size_t d, std::span<const std::int64_t> m) {
  // Gauss-Jordan over the rationals; unimodularity makes the result integral.
  std::vector<mpq_class> a(d * 2 * d);
  const std::size_t w = 2 * d;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) a[i * w + j] = static_cast<long>(m[i * d + j]);
    a[i * w + d + i] = 1;
  }
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t pivot = col;
    while (pivot < d && a[pivot * w + col] == 0) ++pivot;
    if (pivot == d) invalid("toral matrix is singular");
    for (std::size_t c = 0; c < w; ++c) std::swap(a[col * w + c], a[pivot * w + c]);
    const mpq_class p = a[col * w + col];
    for (std::size_t c = 0; c < w; ++c) a[col * w + c] /= p;
    for (std::size_t r = 0; r < d; ++r) {
      if (r == col || a[r * w + col] == 0) continue;
      const mpq_class f = a[r * w + col];
      for (std::size_t c = 0; c < w; ++c) a[r * w + c] -= f * a[col * w + c];
    }
  }
  std::vector<std::int64_t> inv(d * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const mpq_class& v = a[i * w + d + j];
      if (v.get_den() != 1) invalid("toral matrix inverse is not integral");
      inv[i * d + j] = v.get_num().get_si();
    }
  }
  return inv;
}

const FixedCoords& fixed_of(const PhasePoint& p, const char* what) {
  if (const auto* f = std::get_if<FixedCoords>(&p.rep())) return *f;
  invalid(fmt::format("{}: point is not in fixed-point representation", what));
}

}  // namespace

// ---------------------------------------------------------------------------

std::uint64_t read_window(const BitSource& source, std::uint64_t offset) {
  if (const auto* r = std::get_if<RationalBits>(&source)) {
    return rational_word(mulmod(r->numerator, pow2mod(offset, r->denominator), r->denominator),
                         r->denominator);
  }
  if (const auto* f = std::get_if<FiniteBits>(&source)) {
    if (f->budgeted && offset > static_cast<std::uint64_t>(f->precision_bits - f->guard_bits)) {
      throw Error(ErrorCode::BudgetExhausted,
                  fmt::format("fixed-point doubling orbit at step {} exceeds budget {} - {} bits",
                              offset, f->precision_bits, f->guard_bits));
    }
  }
  const std::uint64_t j = offset / 64;
  const unsigned s = static_cast<unsigned>(offset % 64);
  const std::uint64_t hi = source_word(source, j);
  if (s == 0) return hi;
  return (hi << s) | (source_word(source, j + 1) >> (64 - s));
}

// ---------------------------------------------------------------------------

std::size_t PhasePoint::dimension() const {
  return std::visit(
      [](const auto& r) -> std::size_t {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, FixedCoords>) {
          return r.limbs.size() / r.limbs_per_coord;
        } else if constexpr (std::is_same_v<R, StreamCoord>) {
          return 1;
        } else {
          return r.values.size();
        }
      },
      rep_);
}

double PhasePoint::coord(std::size_t i) const {
  return std::visit(
      [i](const auto& r) -> double {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, FixedCoords>) {
          return unit_from_word(r.limbs[i * r.limbs_per_coord + r.limbs_per_coord - 1]);
        } else if constexpr (std::is_same_v<R, StreamCoord>) {
          return unit_from_word(read_window(*r.source, r.offset));
        } else {
          return r.values[i];
        }
      },
      rep_);
}

std::vector<double> PhasePoint::coords() const {
  std::vector<double> out(dimension());
  coords(out);
  return out;
}

void PhasePoint::coords(std::span<double> out) const {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = coord(i);
}

bool StreamCoord::operator==(const StreamCoord& other) const {
  if (offset != other.offset) return false;
  if (source == other.source) return true;
  return source && other.source && *source == *other.source;
}

bool PhasePoint::operator==(const PhasePoint& other) const { return rep_ == other.rep_; }

// ---------------------------------------------------------------------------

SystemSpec SystemSpec::doubling(Doubling::Engine engine, int precision_bits, int guard_bits) {
  check_precision(precision_bits);
  if (guard_bits < 0 || guard_bits >= precision_bits) invalid("guard bits must lie in [0, B)");
  SystemSpec s;
  s.id_ = engine == Doubling::Engine::Reservoir ? "doubling" : "doubling:fixed";
  s.kind_ = Doubling{engine};
  s.dimension_ = 1;
  s.mixing_ = MixingClass::Exponential;
  s.precision_bits_ = precision_bits;
  s.guard_bits_ = guard_bits;
  s.limbs_ = limbs_for(precision_bits);
  return s;
}

SystemSpec SystemSpec::toral(std::size_t dim, std::vector<std::int64_t> matrix,
                             int precision_bits) {
  check_precision(precision_bits);
  if (dim == 0 || dim > kMaxToralDim) invalid(fmt::format("toral dimension {} outside [1, 8]", dim));
  if (matrix.size() != dim * dim) invalid("toral matrix must have dim*dim entries");
  for (auto e : matrix) {
    if (e > kMaxMatrixEntry || e < -kMaxMatrixEntry) invalid("toral matrix entry too large");
  }
  const mpz_class det = determinant(dim, matrix);
  if (det != 1 && det != -1) {
    invalid(fmt::format("toral matrix determinant is {}, expected +-1", det.get_str()));
  }
  SystemSpec s;
  std::string id = "toral:";
  for (std::size_t i = 0; i < matrix.size(); ++i) id += (i ? "," : "") + std::to_string(matrix[i]);
  const bool is_cat = dim == 2 && matrix == std::vector<std::int64_t>{2, 1, 1, 1};
  s.id_ = is_cat ? "cat" : id;
  auto inverse = integer_inverse(dim, matrix);
  s.kind_ = ToralAutomorphism{dim, std::move(matrix), std::move(inverse)};
  s.dimension_ = dim;
  // Hyperbolicity is not checked; only the cat map is annotated as mixing.
  s.mixing_ = is_cat ? MixingClass::Exponential : MixingClass::None;
  s.precision_bits_ = precision_bits;
  s.limbs_ = limbs_for(precision_bits);
  return s;
}

SystemSpec SystemSpec::cat(int precision_bits) { return toral(2, {2, 1, 1, 1}, precision_bits); }

SystemSpec SystemSpec::rotation(std::string_view alpha, int precision_bits) {
  check_precision(precision_bits);
  const std::size_t L = limbs_for(precision_bits);
  std::vector<std::uint64_t> limbs;
  if (alpha == "golden") {
    // (sqrt 5 - 1) / 2 = frac(golden ratio)
    const auto W = static_cast<mp_bitcnt_t>(64 * L);
    mpz_class root = 5;
    root <<= 2 * W;
    mpz_sqrt(root.get_mpz_t(), root.get_mpz_t());
    mpz_class scaled = (root - (mpz_class(1) << W)) / 2;
    limbs = limbs_from_mpz(scaled, L, precision_bits);
  } else if (alpha == "liouville") {
    // sum_{n=1..6} 10^{-n!}
    constexpr unsigned long kDigits = 720;
    mpz_class num = 0;
    unsigned long fact = 1;
    for (unsigned long n = 1; n <= 6; ++n) {
      fact *= n;
      mpz_class term;
      mpz_ui_pow_ui(term.get_mpz_t(), 10, kDigits - fact);
      num += term;
    }
    mpz_class den;
    mpz_ui_pow_ui(den.get_mpz_t(), 10, kDigits);
    limbs = limbs_from_ratio(num, den, L, precision_bits);
  } else {
    std::string_view digits = alpha;
    if (digits.starts_with("0.")) {
      digits.remove_prefix(2);
    } else if (digits.starts_with(".")) {
      digits.remove_prefix(1);
    } else if (digits != "0") {
      invalid(fmt::format("rotation number '{}' must be a decimal in [0,1), 'golden' or 'liouville'",
                          alpha));
    } else {
      digits = "";
    }
    if (!std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      invalid(fmt::format("rotation number '{}' is not a decimal literal", alpha));
    }
    mpz_class num = digits.empty() ? mpz_class(0) : mpz_class(std::string(digits), 10);
    mpz_class den;
    mpz_ui_pow_ui(den.get_mpz_t(), 10, digits.size());
    limbs = limbs_from_ratio(num, den, L, precision_bits);
  }
  SystemSpec s;
  s.id_ = fmt::format("rotation:{}", alpha);
  s.kind_ = CircleRotation{std::move(limbs), std::string(alpha)};
  s.dimension_ = 1;
  s.mixing_ = MixingClass::None;
  s.precision_bits_ = precision_bits;
  s.limbs_ = L;
  return s;
}

SystemSpec SystemSpec::rotation_fraction(std::uint64_t numerator, std::uint64_t denominator,
                                         int precision_bits) {
  check_precision(precision_bits);
  if (denominator == 0 || numerator >= denominator) invalid("rotation fraction must lie in [0,1)");
  const std::size_t L = limbs_for(precision_bits);
  SystemSpec s;
  const std::string label = fmt::format("{}/{}", numerator, denominator);
  s.id_ = "rotation:" + label;
  s.kind_ = CircleRotation{limbs_from_ratio(mpz_class(std::to_string(numerator)),
                                            mpz_class(std::to_string(denominator)), L,
                                            precision_bits),
                           label};
  s.dimension_ = 1;
  s.mixing_ = MixingClass::None;
  s.precision_bits_ = precision_bits;
  s.limbs_ = L;
  return s;
}

SystemSpec SystemSpec::manneville_pomeau(double s_param, SamplerSettings sampler) {
  if (!(s_param > 0.0 && s_param < 1.0)) {
    invalid(fmt::format("Manneville-Pomeau parameter {} outside (0,1)", s_param));
  }
  if (sampler.stride == 0) invalid("sampler stride must be positive");
  SystemSpec s;
  s.id_ = fmt::format("mp:{}", s_param);
  s.kind_ = MannevillePomeau{s_param};
  s.dimension_ = 1;
  s.mixing_ = MixingClass::Polynomial;
  s.precision_bits_ = 53;
  s.limbs_ = 0;
  s.sampler_ = sampler;
  return s;
}

SystemSpec SystemSpec::identity(std::size_t dim, int precision_bits) {
  check_precision(precision_bits);
  if (dim == 0 || dim > kMaxToralDim) invalid("identity dimension outside [1, 8]");
  SystemSpec s;
  s.id_ = fmt::format("identity:{}", dim);
  s.kind_ = IdentityMap{dim};
  s.dimension_ = dim;
  s.mixing_ = MixingClass::None;
  s.precision_bits_ = precision_bits;
  s.limbs_ = limbs_for(precision_bits);
  return s;
}

bool SystemSpec::lebesgue() const { return !std::holds_alternative<MannevillePomeau>(kind_); }

bool SystemSpec::exact_engine() const { return lebesgue(); }

OrbitBudget SystemSpec::budget() const {
  OrbitBudget b;
  b.precision_bits = precision_bits_;
  b.guard_bits = guard_bits_;
  const auto* d = std::get_if<Doubling>(&kind_);
  b.max_steps = (d && d->engine == Doubling::Engine::FixedPoint)
                    ? static_cast<std::uint64_t>(precision_bits_ - guard_bits_)
                    : std::numeric_limits<std::uint64_t>::max();
  return b;
}

SystemSpec parse_system(std::string_view id, int precision_bits) {
  if (id == "doubling") return SystemSpec::doubling(Doubling::Engine::Reservoir, precision_bits);
  if (id == "doubling:fixed") return SystemSpec::doubling(Doubling::Engine::FixedPoint, precision_bits);
  if (id == "cat") return SystemSpec::cat(precision_bits);
  if (id.starts_with("rotation:")) return SystemSpec::rotation(id.substr(9), precision_bits);
  if (id.starts_with("mp:")) {
    const std::string_view text = id.substr(3);
    double s = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), s);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      invalid(fmt::format("cannot parse Manneville-Pomeau parameter in '{}'", id));
    }
    return SystemSpec::manneville_pomeau(s);
  }
  if (id.starts_with("toral:")) {
    std::vector<std::int64_t> entries;
    std::string_view rest = id.substr(6);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view tok = rest.substr(0, comma);
      std::int64_t v = 0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        invalid(fmt::format("cannot parse toral entry '{}'", tok));
      }
      entries.push_back(v);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    const auto dim = static_cast<std::size_t>(std::lround(std::sqrt(double(entries.size()))));
    if (dim * dim != entries.size()) invalid("toral matrix must be square");
    return SystemSpec::toral(dim, std::move(entries), precision_bits);
  }
  invalid(fmt::format("unknown system id '{}'", id));
}

// ---------------------------------------------------------------------------

PhasePoint point_from_fractions(const SystemSpec& system, std::span<const Fraction> coords) {
  if (coords.size() != system.dimension()) invalid("coordinate count does not match system dimension");
  for (const auto& f : coords) {
    if (f.denominator == 0) invalid("zero denominator");
  }
  if (const auto* d = std::get_if<Doubling>(&system.kind())) {
    const Fraction f{coords[0].numerator % coords[0].denominator, coords[0].denominator};
    if (d->engine == Doubling::Engine::Reservoir) {
      return PhasePoint(StreamCoord{std::make_shared<const BitSource>(RationalBits{f.numerator, f.denominator}), 0});
    }
    auto limbs = limbs_from_ratio(mpz_class(std::to_string(f.numerator)),
                                  mpz_class(std::to_string(f.denominator)),
                                  system.limbs_per_coord(), system.precision_bits());
    std::reverse(limbs.begin(), limbs.end());
    return PhasePoint(StreamCoord{std::make_shared<const BitSource>(FiniteBits{
                                      std::move(limbs), system.precision_bits(),
                                      system.guard_bits(), true}),
                                  0});
  }
  if (std::holds_alternative<MannevillePomeau>(system.kind())) {
    return PhasePoint(FloatCoords{{static_cast<double>(coords[0].numerator % coords[0].denominator) /
                                   static_cast<double>(coords[0].denominator)}});
  }
  const std::size_t L = system.limbs_per_coord();
  FixedCoords fc{system.precision_bits(), L, {}};
  fc.limbs.reserve(L * coords.size());
  for (const auto& f : coords) {
    auto limbs = limbs_from_ratio(mpz_class(std::to_string(f.numerator % f.denominator)),
                                  mpz_class(std::to_string(f.denominator)), L,
                                  system.precision_bits());
    fc.limbs.insert(fc.limbs.end(), limbs.begin(), limbs.end());
  }
  return PhasePoint(std::move(fc));
}

PhasePoint point_from_fraction(const SystemSpec& system, std::uint64_t num, std::uint64_t den) {
  const Fraction f{num, den};
  return point_from_fractions(system, std::span<const Fraction>(&f, 1));
}

PhasePoint point_from_doubles(const SystemSpec& system, std::span<const double> coords) {
  if (coords.size() != system.dimension()) invalid("coordinate count does not match system dimension");
  if (std::holds_alternative<MannevillePomeau>(system.kind())) {
    std::vector<double> v(coords.begin(), coords.end());
    for (auto& x : v) x -= std::floor(x);
    return PhasePoint(FloatCoords{std::move(v)});
  }
  if (const auto* d = std::get_if<Doubling>(&system.kind())) {
    const std::uint64_t w = word_from_double(coords[0]);
    FiniteBits bits;
    if (d->engine == Doubling::Engine::Reservoir) {
      bits = FiniteBits{{w}, 64, 0, false};
    } else {
      std::vector<std::uint64_t> words(system.limbs_per_coord(), 0);
      words[0] = w;
      bits = FiniteBits{std::move(words), system.precision_bits(), system.guard_bits(), true};
    }
    return PhasePoint(StreamCoord{std::make_shared<const BitSource>(std::move(bits)), 0});
  }
  const std::size_t L = system.limbs_per_coord();
  FixedCoords fc{system.precision_bits(), L, std::vector<std::uint64_t>(L * coords.size(), 0)};
  for (std::size_t c = 0; c < coords.size(); ++c) {
    fc.limbs[c * L + L - 1] = word_from_double(coords[c]);
    mask_low(std::span(fc.limbs).subspan(c * L, L), system.precision_bits());
  }
  return PhasePoint(std::move(fc));
}

PhasePoint point_with_leading_words(const SystemSpec& system,
                                    std::span<const std::uint64_t> words,
                                    std::uint64_t tail_key) {
  if (words.size() != system.dimension()) invalid("word count does not match system dimension");
  if (std::holds_alternative<MannevillePomeau>(system.kind())) {
    std::vector<double> v;
    for (auto w : words) v.push_back(unit_from_word(w));
    return PhasePoint(FloatCoords{std::move(v)});
  }
  if (const auto* d = std::get_if<Doubling>(&system.kind())) {
    if (d->engine == Doubling::Engine::Reservoir) {
      return PhasePoint(
          StreamCoord{std::make_shared<const BitSource>(RandomBits{tail_key, {words[0]}}), 0});
    }
    const std::size_t L = system.limbs_per_coord();
    std::vector<std::uint64_t> msb_first(L);
    msb_first[0] = words[0];
    for (std::size_t j = 1; j < L; ++j) msb_first[j] = random_word(tail_key, j);
    std::vector<std::uint64_t> le(msb_first.rbegin(), msb_first.rend());
    mask_low(le, system.precision_bits());
    std::vector<std::uint64_t> be(le.rbegin(), le.rend());
    return PhasePoint(StreamCoord{std::make_shared<const BitSource>(FiniteBits{
                                      std::move(be), system.precision_bits(), system.guard_bits(), true}),
                                  0});
  }
  const std::size_t L = system.limbs_per_coord();
  FixedCoords fc{system.precision_bits(), L, std::vector<std::uint64_t>(L * words.size(), 0)};
  for (std::size_t c = 0; c < words.size(); ++c) {
    fc.limbs[c * L + L - 1] = words[c];
    for (std::size_t t = 1; t < L; ++t) fc.limbs[c * L + L - 1 - t] = random_word(tail_key, c * L + t);
    mask_low(std::span(fc.limbs).subspan(c * L, L), system.precision_bits());
  }
  return PhasePoint(std::move(fc));
}

// ---------------------------------------------------------------------------

OrbitCursor::OrbitCursor(const SystemSpec& system, const PhasePoint& start)
    : system_(system), state_(start.rep()), coords_(system.dimension()) {
  const bool ok = std::visit(
      [&](const auto& kind) {
        using K = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<K, Doubling>) {
          return std::holds_alternative<StreamCoord>(state_);
        } else if constexpr (std::is_same_v<K, MannevillePomeau>) {
          return std::holds_alternative<FloatCoords>(state_);
        } else {
          const auto* f = std::get_if<FixedCoords>(&state_);
          return f && f->limbs_per_coord == system_.limbs_per_coord() &&
                 f->limbs.size() == f->limbs_per_coord * system_.dimension();
        }
      },
      system_.kind());
  if (!ok || start.dimension() != system.dimension()) {
    invalid(fmt::format("point representation does not match system '{}'", system.id()));
  }
  if (auto* s = std::get_if<StreamCoord>(&state_)) {
    if (const auto* r = std::get_if<RationalBits>(s->source.get())) {
      rational_rem_ = mulmod(r->numerator, pow2mod(s->offset, r->denominator), r->denominator);
    }
  }
  if (std::holds_alternative<ToralAutomorphism>(system_.kind())) {
    scratch_.resize(std::get<FixedCoords>(state_).limbs.size());
  }
  refresh();
}

void OrbitCursor::refresh() {
  if (auto* s = std::get_if<StreamCoord>(&state_)) {
    if (const auto* r = std::get_if<RationalBits>(s->source.get())) {
      coords_[0] = unit_from_word(rational_word(rational_rem_, r->denominator));
    } else {
      coords_[0] = unit_from_word(read_window(*s->source, s->offset));
    }
  } else if (auto* f = std::get_if<FixedCoords>(&state_)) {
    const std::size_t L = f->limbs_per_coord;
    for (std::size_t c = 0; c < coords_.size(); ++c) coords_[c] = unit_from_word(f->limbs[c * L + L - 1]);
  } else {
    const auto& v = std::get<FloatCoords>(state_).values;
    std::copy(v.begin(), v.end(), coords_.begin());
  }
}

void OrbitCursor::advance() {
  std::visit(
      [&](const auto& kind) {
        using K = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<K, Doubling>) {
          auto& s = std::get<StreamCoord>(state_);
          if (const auto* r = std::get_if<RationalBits>(s.source.get())) {
            rational_rem_ = static_cast<std::uint64_t>((u128{rational_rem_} * 2) % r->denominator);
          }
          ++s.offset;
        } else if constexpr (std::is_same_v<K, ToralAutomorphism>) {
          auto& f = std::get<FixedCoords>(state_);
          apply_matrix(kind.matrix, kind.dim, f.limbs_per_coord, f.limbs.data(), scratch_.data());
          f.limbs.swap(scratch_);
        } else if constexpr (std::is_same_v<K, CircleRotation>) {
          auto& f = std::get<FixedCoords>(state_);
          add_limbs(f.limbs.data(), kind.alpha.data(), f.limbs_per_coord);
        } else if constexpr (std::is_same_v<K, MannevillePomeau>) {
          auto& v = std::get<FloatCoords>(state_).values;
          v[0] = mp_map(v[0], kind.s);
        }
      },
      system_.kind());
  ++steps_;
  refresh();
}

PhasePoint OrbitCursor::point() const { return PhasePoint(state_); }

PhasePoint step(const SystemSpec& system, const PhasePoint& p) {
  OrbitCursor cursor(system, p);
  cursor.advance();
  return cursor.point();
}

PhasePoint orbit_window(const SystemSpec& system, const PhasePoint& p, std::uint64_t n) {
  if (n == 0) return p;
  if (const auto* s = std::get_if<StreamCoord>(&p.rep())) {
    if (!std::holds_alternative<Doubling>(system.kind())) {
      invalid("stream point used with a non-doubling system");
    }
    read_window(*s->source, s->offset + n);  // budget check
    return PhasePoint(StreamCoord{s->source, s->offset + n});
  }
  if (const auto* rot = std::get_if<CircleRotation>(&system.kind())) {
    FixedCoords f = fixed_of(p, "orbit_window");
    const auto shift = scale_limbs(rot->alpha, n);
    add_limbs(f.limbs.data(), shift.data(), f.limbs_per_coord);
    return PhasePoint(std::move(f));
  }
  if (std::holds_alternative<IdentityMap>(system.kind())) return p;
  OrbitCursor cursor(system, p);
  for (std::uint64_t i = 0; i < n; ++i) cursor.advance();
  return cursor.point();
}

PhasePoint step_inverse(const SystemSpec& system, const PhasePoint& p) {
  return std::visit(
      [&](const auto& kind) -> PhasePoint {
        using K = std::decay_t<decltype(kind)>;
        if constexpr (std::is_same_v<K, ToralAutomorphism>) {
          const auto& f = fixed_of(p, "step_inverse");
          FixedCoords out = f;
          apply_matrix(kind.inverse, kind.dim, f.limbs_per_coord, f.limbs.data(), out.limbs.data());
          return PhasePoint(std::move(out));
        } else if constexpr (std::is_same_v<K, CircleRotation>) {
          FixedCoords out = fixed_of(p, "step_inverse");
          sub_limbs(out.limbs.data(), kind.alpha.data(), out.limbs_per_coord);
          return PhasePoint(std::move(out));
        } else if constexpr (std::is_same_v<K, IdentityMap>) {
          return p;
        } else {
          invalid(fmt::format("system '{}' is not invertible", system.id()));
        }
      },
      system.kind());
}

// ---------------------------------------------------------------------------

PhasePoint invariant_sample(const SystemSpec& system, std::uint64_t seed, std::uint64_t index) {
  if (!system.lebesgue()) invalid("random-access invariant sampling needs a Lebesgue system");
  const std::uint64_t key = derive_key(seed, stream::invariant, index);
  if (const auto* d = std::get_if<Doubling>(&system.kind())) {
    if (d->engine == Doubling::Engine::Reservoir) {
      return PhasePoint(StreamCoord{std::make_shared<const BitSource>(RandomBits{key, {}}), 0});
    }
    const std::size_t L = system.limbs_per_coord();
    std::vector<std::uint64_t> le(L);
    for (std::size_t t = 0; t < L; ++t) le[L - 1 - t] = random_word(key, t);
    mask_low(le, system.precision_bits());
    return PhasePoint(StreamCoord{
        std::make_shared<const BitSource>(FiniteBits{std::vector<std::uint64_t>(le.rbegin(), le.rend()),
                                                     system.precision_bits(), system.guard_bits(), true}),
        0});
  }
  const std::size_t L = system.limbs_per_coord();
  const std::size_t d = system.dimension();
  FixedCoords fc{system.precision_bits(), L, std::vector<std::uint64_t>(L * d)};
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t t = 0; t < L; ++t) fc.limbs[c * L + L - 1 - t] = random_word(key, c * L + t);
    mask_low(std::span(fc.limbs).subspan(c * L, L), system.precision_bits());
  }
  return PhasePoint(std::move(fc));
}

namespace {

std::vector<double> mp_orbit_samples(const SystemSpec& system, std::uint64_t seed, std::size_t count) {
  const auto& mp = std::get<MannevillePomeau>(system.kind());
  const auto& cfg = system.sampler();
  CounterRng rng(derive_key(seed, stream::invariant, 0));
  double x = rng.next_unit();
  if (x == 0.0) x = 0.5;
  for (std::uint64_t i = 0; i < cfg.burn_in; ++i) x = mp_map(x, mp.s);
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(x);
    for (std::uint64_t k = 0; k < cfg.stride; ++k) x = mp_map(x, mp.s);
  }
  return out;
}

}  // namespace

std::vector<PhasePoint> sample_invariant(const SystemSpec& system, std::uint64_t seed,
                                         std::size_t count) {
  std::vector<PhasePoint> out;
  out.reserve(count);
  if (!system.lebesgue()) {
    for (double x : mp_orbit_samples(system, seed, count)) out.emplace_back(FloatCoords{{x}});
    return out;
  }
  for (std::size_t i = 0; i < count; ++i) out.push_back(invariant_sample(system, seed, i));
  return out;
}

std::vector<PhasePoint> start_points(const SystemSpec& system, std::uint64_t seed,
                                     std::size_t count) {
  if (system.lebesgue()) return sample_invariant(system, seed, count);
  const auto& mp = std::get<MannevillePomeau>(system.kind());
  std::vector<PhasePoint> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    double x = unit_from_word(random_word(derive_key(seed, stream::points, i), 0));
    if (x == 0.0) x = 0.5;
    for (std::uint64_t k = 0; k < system.sampler().burn_in; ++k) x = mp_map(x, mp.s);
    out.emplace_back(FloatCoords{{x}});
  }
  return out;
}

std::vector<double> sample_invariant_coords(const SystemSpec& system, std::uint64_t seed,
                                            std::size_t count, unsigned workers) {
  if (!system.lebesgue()) return mp_orbit_samples(system, seed, count);
  const std::size_t d = system.dimension();
  // Only the top word of each coordinate reaches a double, so the full point
  // need not be materialized. The word index matches invariant_sample.
  const std::size_t L = std::holds_alternative<Doubling>(system.kind()) ? 1 : system.limbs_per_coord();
  std::vector<double> out(count * d);
  parallel_for(chunk_count(count), workers, [&](std::size_t chunk) {
    const std::size_t end = std::min(count, (chunk + 1) * kTallyChunk);
    for (std::size_t i = chunk * kTallyChunk; i < end; ++i) {
      const std::uint64_t key = derive_key(seed, stream::invariant, i);
      for (std::size_t c = 0; c < d; ++c) out[i * d + c] = unit_from_word(random_word(key, c * L));
    }
  });
  return out;
}

// ---------------------------------------------------------------------------

double torus_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() == 1) {
    double delta = std::fabs(a[0] - b[0]);
    delta -= std::floor(delta);
    return std::min(delta, 1.0 - delta);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double delta = std::fabs(a[i] - b[i]);
    delta -= std::floor(delta);
    delta = std::min(delta, 1.0 - delta);
    sum += delta * delta;
  }
  return std::sqrt(sum);
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() == 1) return std::fabs(a[0] - b[0]);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sum);
}

}  // namespace hitlab

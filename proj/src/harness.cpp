#include "hitlab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "hitlab/error.hpp"
#include "hitlab/flow.hpp"
#include "hitlab/hitting.hpp"
#include "hitlab/mixing.hpp"
#include "hitlab/observed.hpp"
#include "hitlab/parallel.hpp"
#include "hitlab/random.hpp"
#include "hitlab/return_stats.hpp"
#include "hitlab/stats.hpp"
#include "text.hpp"

namespace hitlab {

namespace {

[[noreturn]] void config_invalid(const std::string& where, const std::string& msg) {
  throw Error(ErrorCode::ConfigInvalid, fmt::format("{}: {}", where, msg), where);
}

template <class Fn>
auto at_field(const std::string& where, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid && !e.where().empty() && e.where() != "ladder") throw;
    config_invalid(where, e.what());
  }
}

std::uint64_t parse_u64(std::string_view tok, const std::string& where) {
  tok = text::trim(tok);
  double as_double = 0.0;
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (!tok.empty() && ec == std::errc() && ptr == tok.data() + tok.size()) return v;
  // Accept integral scientific notation such as 1e7.
  const auto [p2, e2] = std::from_chars(tok.data(), tok.data() + tok.size(), as_double);
  if (!tok.empty() && e2 == std::errc() && p2 == tok.data() + tok.size() && as_double >= 0 &&
      as_double < 1.8e19 && std::floor(as_double) == as_double) {
    return static_cast<std::uint64_t>(as_double);
  }
  config_invalid(where, fmt::format("expected a non-negative integer, got '{}'", tok));
}

// Typed access to one config section; remembers which keys were read so
// leftovers can be rejected as unknown.
class Params {
 public:
  Params(std::string section, const std::map<std::string, std::string>& values)
      : section_(std::move(section)), values_(values) {}

  std::string path(const std::string& key) const { return section_ + "." + key; }

  std::optional<std::string> optional(const std::string& key) {
    read_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }
  std::string required(const std::string& key) {
    auto v = optional(key);
    if (!v || v->empty()) config_invalid(path(key), "missing value");
    return *v;
  }
  std::string text(const std::string& key, const std::string& fallback) {
    return optional(key).value_or(fallback);
  }
  double number(const std::string& key, double fallback) {
    const auto v = optional(key);
    if (!v) return fallback;
    return at_field(path(key), [&] { return text::to_double(*v, key); });
  }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    const auto v = optional(key);
    return v ? parse_u64(*v, path(key)) : fallback;
  }
  void finish() const {
    for (const auto& [key, value] : values_) {
      if (!read_.count(key)) config_invalid(path(key), "unknown key");
    }
  }

 private:
  std::string section_;
  const std::map<std::string, std::string>& values_;
  std::set<std::string> read_;
};

RadiusLadder parse_ladder(std::string_view spec, double gap, const std::string& where) {
  return at_field(where, [&] {
    if (spec.starts_with("dyadic:")) {
      const auto parts = text::split(spec.substr(7), ':');
      if (parts.size() < 2 || parts.size() > 3) config_invalid(where, "expected dyadic:<first>:<last>[:<step>]");
      const double step = parts.size() == 3 ? text::to_double(parts[2], "ladder step") : 1.0;
      return RadiusLadder::dyadic(text::to_double(parts[0], "ladder exponent"),
                                  text::to_double(parts[1], "ladder exponent"), step, gap);
    }
    return RadiusLadder(text::to_doubles(spec, "ladder radius"), gap);
  });
}

RadiusLadder ladder_param(Params& p, const std::string& key, const std::string& fallback = {}) {
  const double gap = p.number(key + "_gap", 0.25);
  const std::string spec = fallback.empty() ? p.required(key) : p.text(key, fallback);
  return parse_ladder(spec, gap, p.path(key));
}

std::vector<std::uint64_t> parse_lags(std::string_view spec, const std::string& where) {
  std::vector<std::uint64_t> out;
  if (const auto dots = spec.find(".."); dots != std::string_view::npos) {
    const auto lo = parse_u64(spec.substr(0, dots), where);
    const auto hi = parse_u64(spec.substr(dots + 2), where);
    if (lo > hi) config_invalid(where, "empty lag range");
    for (auto n = lo; n <= hi; ++n) out.push_back(n);
    return out;
  }
  for (auto tok : text::split(spec, ',')) out.push_back(parse_u64(tok, where));
  return out;
}

Json stats_json(const std::vector<double>& v) {
  if (v.empty()) return Json{{"median", nullptr}, {"q25", nullptr}, {"q75", nullptr}, {"mean", nullptr}};
  return Json{{"median", median(v)}, {"q25", quantile(v, 0.25)}, {"q75", quantile(v, 0.75)},
              {"mean", mean(v)}};
}

Json dimension_json(const DimensionEstimate& d) {
  Json rungs = Json::array();
  for (std::size_t k = 0; k < d.radii.size(); ++k) {
    rungs.push_back({{"r", d.radii[k]},
                     {"measure", d.measures[k].value},
                     {"half_width", d.measures[k].half_width},
                     {"used", static_cast<bool>(d.used[k])}});
  }
  return Json{{"d_upper", d.d_upper},         {"d_lower", d.d_lower},
              {"slope", d.slope},             {"slope_stderr", d.slope_stderr},
              {"window_first", d.window_first}, {"window_last", d.window_last},
              {"window_width", d.window_width}, {"exact", d.exact},
              {"rungs", std::move(rungs)}};
}

// A single d is reported only when the two bounds agree.
constexpr double kDimensionAgreement = 0.1;

Json dimension_summary(const DimensionEstimate& d) {
  const bool agree = std::fabs(d.d_upper - d.d_lower) <= kDimensionAgreement;
  return Json{{"d_upper", d.d_upper}, {"d_lower", d.d_lower}, {"slope", d.slope},
              {"exact", d.exact},     {"bounds_agree", agree}, {"d", agree ? Json(0.5 * (d.d_upper + d.d_lower)) : Json()}};
}

CsvTable rung_table(const DimensionEstimate& d, std::string name) {
  CsvTable t{std::move(name), {"r", "measure", "half_width", "used"}, {}};
  for (std::size_t k = 0; k < d.radii.size(); ++k) {
    t.rows.push_back({csv_number(d.radii[k]), csv_number(d.measures[k].value),
                      csv_number(d.measures[k].half_width), d.used[k] ? "1" : "0"});
  }
  return t;
}

Json decay_json(const DecayFit& fit) {
  return Json{{"class", to_string(fit.decay_class)}, {"rate", fit.rate},
              {"log_prefactor", fit.log_prefactor}, {"exp_residual", fit.exp_residual},
              {"poly_residual", fit.poly_residual}, {"max_abs_residual", fit.max_abs_residual},
              {"first_lag", fit.first_lag},         {"last_lag", fit.last_lag},
              {"usable", fit.usable},               {"norm_product", fit.norm_product}};
}

struct Output {
  Json data = Json::object();
  Json summary = Json::object();
  std::vector<CsvTable> tables;
};

using Job = std::function<Output(unsigned workers)>;

// ---------------------------------------------------------------------------
// Per-point exponent runs, shared by the hitting and observed kinds.

struct PointFit {
  std::vector<HittingRecord> records;
  std::optional<ExponentEstimate> fit;
};

void exponent_section(Output& out, const std::vector<PointFit>& fits) {
  Json points = Json::array();
  Json records = Json::array();
  CsvTable rec_table{"records", {"point_id", "r", "tau", "censored"}, {}};
  CsvTable fit_table{"fits", {"point_id", "R_upper", "R_lower", "slope", "censor_fraction", "fitted"}, {}};
  std::vector<double> up, lo, slope, censor;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    for (const auto& r : fits[i].records) {
      records.push_back({{"point_id", r.point_id}, {"r", r.radius}, {"tau", r.tau}, {"censored", r.censored}});
      rec_table.rows.push_back({std::to_string(r.point_id), csv_number(r.radius), std::to_string(r.tau),
                                r.censored ? "1" : "0"});
    }
    const std::size_t n_cens = static_cast<std::size_t>(std::count_if(
        fits[i].records.begin(), fits[i].records.end(), [](const auto& r) { return r.censored; }));
    const double cf = fits[i].records.empty() ? 0.0 : static_cast<double>(n_cens) / fits[i].records.size();
    censor.push_back(cf);
    if (const auto& f = fits[i].fit) {
      up.push_back(f->R_upper);
      lo.push_back(f->R_lower);
      slope.push_back(f->slope);
      points.push_back({{"point_id", i}, {"R_upper", f->R_upper}, {"R_lower", f->R_lower},
                        {"slope", f->slope}, {"censor_fraction", cf}, {"fitted", true}});
      fit_table.rows.push_back({std::to_string(i), csv_number(f->R_upper), csv_number(f->R_lower),
                                csv_number(f->slope), csv_number(cf), "1"});
    } else {
      points.push_back({{"point_id", i}, {"R_upper", nullptr}, {"R_lower", nullptr}, {"slope", nullptr},
                        {"censor_fraction", cf}, {"fitted", false}});
      fit_table.rows.push_back({std::to_string(i), "", "", "", csv_number(cf), "0"});
    }
  }
  out.data["points"] = std::move(points);
  out.data["records"] = std::move(records);
  out.summary["points"] = fits.size();
  out.summary["fitted"] = up.size();
  out.summary["R_upper"] = stats_json(up);
  out.summary["R_lower"] = stats_json(lo);
  out.summary["slope"] = stats_json(slope);
  out.summary["mean_censor_fraction"] = mean(censor);
  out.tables.push_back(std::move(rec_table));
  out.tables.push_back(std::move(fit_table));
}

template <class Hits>
std::vector<PointFit> fit_points(std::size_t count, unsigned workers, const ExponentOptions& eopts,
                                 Hits&& hits) {
  std::vector<PointFit> fits(count);
  parallel_for(count, workers, [&](std::size_t i) {
    fits[i].records = hits(i);
    try {
      fits[i].fit = fit_exponent(fits[i].records, eopts);
      fits[i].fit->records.clear();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AllCensored) throw;
    }
  });
  return fits;
}

std::uint64_t cap_param(Params& p) {
  const auto v = p.text("cap", "auto");
  return v == "auto" ? 0 : parse_u64(v, p.path("cap"));
}

std::uint64_t resolve_cap(std::uint64_t cap, double smallest_measure, const std::string& where) {
  if (cap != 0) return cap;
  if (!(smallest_measure > 0.0)) {
    throw Error(ErrorCode::Degenerate,
                "automatic cap needs a positive measure estimate at the smallest rung; set a cap", where);
  }
  return default_cap(smallest_measure);
}

// ---------------------------------------------------------------------------

Job prepare_dimension(const SystemSpec& system, Params& p, std::uint64_t seed) {
  const auto f = at_field(p.path("observable"), [&] { return parse_observable(p.required("observable"), system.dimension()); });
  const auto ladder = ladder_param(p, "ladder");
  const auto samples = p.count("samples", 100'000);
  EstimatorOptions eo;
  eo.window = p.count("window", 4);
  eo.confidence = p.number("confidence", 0.95);
  return [=](unsigned workers) {
    auto opts = eo;
    opts.workers = workers;
    const auto d = estimate_dimension(f, ladder, system, derive_key(seed, stream::invariant, 0), samples, opts);
    Output out;
    out.data["dimension"] = dimension_json(d);
    out.summary["observable"] = f.label();
    out.summary["dimension"] = dimension_summary(d);
    out.tables.push_back(rung_table(d, "rungs"));
    return out;
  };
}

Job prepare_hitting(const SystemSpec& system, Params& p, std::uint64_t seed) {
  const auto f = at_field(p.path("observable"), [&] { return parse_observable(p.required("observable"), system.dimension()); });
  const auto ladder = ladder_param(p, "ladder");
  const auto points = p.count("points", 200);
  const auto cap = cap_param(p);
  ExponentOptions xo;
  xo.window = p.count("window", 0);
  const auto samples = p.count("samples", 100'000);
  EstimatorOptions eo;
  eo.window = p.count("dimension_window", 4);
  if (points < 1) config_invalid(p.path("points"), "need at least one point");
  return [=](unsigned workers) {
    auto opts = eo;
    opts.workers = workers;
    const auto d = estimate_dimension(f, ladder, system, derive_key(seed, stream::invariant, 0), samples, opts);
    const auto the_cap = resolve_cap(cap, d.measures.back().value, "hitting.cap");
    const auto starts = start_points(system, derive_key(seed, stream::points, 0), points);
    const auto fits = fit_points(points, workers, xo, [&](std::size_t i) {
      return hitting_times(system, starts[i], f, ladder.radii(), the_cap, i);
    });
    Output out;
    exponent_section(out, fits);
    out.data["dimension"] = dimension_json(d);
    out.summary["observable"] = f.label();
    out.summary["cap"] = the_cap;
    out.summary["dimension"] = dimension_summary(d);
    out.tables.push_back(rung_table(d, "rungs"));
    return out;
  };
}

Job prepare_observed(const SystemSpec& system, Params& p, std::uint64_t seed) {
  const std::size_t dim = system.dimension();
  const auto F = at_field(p.path("map"), [&] { return parse_observation_map(p.required("map"), dim); });
  const auto target_spec = p.text("target", "random");
  std::vector<double> x0;
  if (target_spec != "random") {
    x0 = at_field(p.path("target"), [&] { return text::to_doubles(target_spec, "target coordinate"); });
    if (x0.size() != dim) config_invalid(p.path("target"), fmt::format("expected {} coordinates", dim));
  }
  const auto ladder = ladder_param(p, "ladder");
  const auto points = p.count("points", 200);
  const auto cap = cap_param(p);
  ExponentOptions xo;
  xo.window = p.count("window", 0);
  const auto samples = p.count("samples", 200'000);
  EstimatorOptions eo;
  eo.window = p.count("dimension_window", 4);
  const auto rank_points = p.count("rank_points", 0);
  const auto rank_ladder = ladder_param(p, "rank_ladder", "dyadic:5:11");
  const auto rank_samples = p.count("rank_samples", 1'000'000);
  const double rank_step = p.number("rank_step", kDefaultJacobianStep);
  if (points < 1) config_invalid(p.path("points"), "need at least one point");
  if (!(rank_step >= 1e-8 && rank_step <= 1e-2)) config_invalid(p.path("rank_step"), "must lie in [1e-8, 1e-2]");
  return [=](unsigned workers) {
    auto opts = eo;
    opts.workers = workers;
    auto base = x0;
    if (base.empty()) base = start_points(system, derive_key(seed, stream::points, 1), 1).front().coords();
    const auto d = pushforward_dimension(system, F, base, ladder, derive_key(seed, stream::invariant, 0), samples, opts);
    const auto the_cap = resolve_cap(cap, d.measures.back().value, "observed.cap");
    const auto starts = start_points(system, derive_key(seed, stream::points, 0), points);
    const auto fits = fit_points(points, workers, xo, [&](std::size_t i) {
      return observed_hitting_times(system, starts[i], base, F, ladder.radii(), the_cap, i);
    });
    const auto rank = jacobian_rank(F, base, rank_step);
    Output out;
    exponent_section(out, fits);
    out.data["target"] = base;
    out.data["dimension"] = dimension_json(d);
    out.data["rank"] = {{"jacobian", rank.jacobian}, {"singular_values", rank.singular_values},
                        {"tolerance", rank.tolerance}, {"rank", rank.rank}};
    out.summary["map"] = F.label();
    out.summary["cap"] = the_cap;
    out.summary["dimension"] = dimension_summary(d);
    out.summary["rank"] = rank.rank;
    out.tables.push_back(rung_table(d, "rungs"));

    if (rank_points > 0) {
      const auto coords = sample_invariant_coords(system, derive_key(seed, stream::points, 3), rank_points, workers);
      auto ropts = opts;
      const auto dims = pushforward_dimensions(system, F, coords, rank_ladder,
                                               derive_key(seed, stream::invariant, 1), rank_samples, ropts);
      Json rows = Json::array();
      CsvTable t{"rank_dimension", {"point_id", "slope", "rank", "agrees"}, {}};
      std::size_t agree = 0;
      for (std::size_t i = 0; i < rank_points; ++i) {
        const auto r = jacobian_rank(F, std::span<const double>(coords).subspan(i * dim, dim), rank_step);
        const bool ok = std::fabs(dims[i].slope - static_cast<double>(r.rank)) <= 0.25;
        agree += ok;
        rows.push_back({{"point_id", i}, {"slope", dims[i].slope}, {"rank", r.rank}, {"agrees", ok}});
        t.rows.push_back({std::to_string(i), csv_number(dims[i].slope), std::to_string(r.rank), ok ? "1" : "0"});
      }
      out.data["rank_dimension"] = std::move(rows);
      out.summary["rank_dimension"] = {{"points", rank_points}, {"agree", agree},
                                       {"fraction", static_cast<double>(agree) / rank_points}};
      out.tables.push_back(std::move(t));
    }
    return out;
  };
}

Job prepare_borel_cantelli(const SystemSpec& system, Params& p, std::uint64_t seed) {
  const auto f = at_field(p.path("observable"), [&] { return parse_observable(p.required("observable"), system.dimension()); });
  const double beta = p.number("beta", 0.5);
  const auto k_max = p.count("k_max", 100'000);
  const auto points = p.count("points", 100);
  const double d_upper = p.number("d_upper", static_cast<double>(system.dimension()));
  const auto measure = p.text("measure", "exact");
  const auto measure_samples = p.count("measure_samples", 100'000);
  std::vector<std::uint64_t> checkpoints;
  if (auto c = p.optional("checkpoints")) checkpoints = parse_lags(*c, p.path("checkpoints"));
  if (measure != "exact" && measure != "mc") config_invalid(p.path("measure"), "expected 'exact' or 'mc'");
  if (k_max < 1000) config_invalid(p.path("k_max"), "must be at least 1000");
  if (!(beta > 0.0 && beta < 1.0 / d_upper)) config_invalid(p.path("beta"), "need 0 < beta < 1 / d_upper");
  return [=](unsigned workers) {
    MeasureSource src;
    src.kind = measure == "exact" ? MeasureSource::Kind::Exact : MeasureSource::Kind::MonteCarlo;
    src.seed = derive_key(seed, stream::invariant, 2);
    src.samples = measure_samples;
    src.workers = 1;
    const auto starts = start_points(system, derive_key(seed, stream::points, 0), points);
    std::vector<std::vector<BCCounter>> series(points);
    parallel_for(points, workers, [&](std::size_t i) {
      series[i] = bc_counter_series(system, starts[i], f, beta, k_max, d_upper, src, checkpoints);
    });
    Output out;
    Json rows = Json::array();
    CsvTable t{"series", {"point_id", "k", "Z", "EZ", "ratio"}, {}};
    std::vector<double> finals;
    for (std::size_t i = 0; i < points; ++i) {
      Json k = Json::array(), z = Json::array(), ratio = Json::array();
      for (const auto& c : series[i]) {
        k.push_back(c.k);
        z.push_back(c.Z);
        ratio.push_back(c.ratio);
        t.rows.push_back({std::to_string(i), std::to_string(c.k), std::to_string(c.Z), csv_number(c.EZ),
                          csv_number(c.ratio)});
      }
      finals.push_back(series[i].back().ratio);
      rows.push_back({{"point_id", i}, {"k", std::move(k)}, {"Z", std::move(z)}, {"ratio", std::move(ratio)}});
    }
    Json ez = Json::array();
    for (const auto& c : series.front()) ez.push_back(c.EZ);
    out.data["expected"] = std::move(ez);
    out.data["points"] = std::move(rows);
    const auto in_band = std::count_if(finals.begin(), finals.end(), [](double r) { return r >= 0.8 && r <= 1.2; });
    out.summary["observable"] = f.label();
    out.summary["beta"] = beta;
    out.summary["k_max"] = k_max;
    out.summary["EZ_final"] = series.front().back().EZ;
    out.summary["final_ratio"] = stats_json(finals);
    out.summary["fraction_in_band"] = static_cast<double>(in_band) / static_cast<double>(points);
    out.tables.push_back(std::move(t));
    return out;
  };
}

Job prepare_correlation(const SystemSpec& system, Params& p, std::uint64_t seed) {
  const std::size_t dim = system.dimension();
  const auto phi_spec = p.required("phi");
  const auto phi = at_field(p.path("phi"), [&] { return parse_test_function(phi_spec, dim); });
  const auto psi = at_field(p.path("psi"), [&] { return parse_test_function(p.text("psi", phi_spec), dim); });
  const auto lags = parse_lags(p.text("lags", "1..30"), p.path("lags"));
  const auto samples = p.count("samples", 1'000'000);
  CorrelationOptions co;
  co.confidence = p.number("confidence", 0.95);
  if (samples < 1000) config_invalid(p.path("samples"), "must be at least 1000");
  for (std::size_t i = 1; i < lags.size(); ++i) {
    if (lags[i] <= lags[i - 1]) config_invalid(p.path("lags"), "lags must strictly increase");
  }
  return [=](unsigned workers) {
    auto opts = co;
    opts.workers = workers;
    const auto s = estimate_correlation(system, phi, psi, lags, derive_key(seed, stream::correlation, 0), samples, opts);
    Output out;
    CsvTable t{"series", {"lag", "value", "covariance", "half_width"}, {}};
    for (std::size_t i = 0; i < s.lags.size(); ++i) {
      t.rows.push_back({std::to_string(s.lags[i]), csv_number(s.values[i]), csv_number(s.covariance[i]),
                        csv_number(s.half_widths[i])});
    }
    out.data["series"] = {{"lags", s.lags}, {"values", s.values}, {"covariance", s.covariance},
                          {"half_widths", s.half_widths}, {"samples", s.samples}};
    out.summary["phi"] = phi.label();
    out.summary["psi"] = psi.label();
    out.summary["phi_norm"] = {{"sup", s.phi_norm.sup}, {"lip", s.phi_norm.lip}};
    out.summary["psi_norm"] = {{"sup", s.psi_norm.sup}, {"lip", s.psi_norm.lip}};
    try {
      out.summary["decay"] = decay_json(fit_decay(s));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Degenerate) throw;
      out.summary["decay"] = {{"class", "undetermined"}, {"reason", e.what()}};
    }
    out.tables.push_back(std::move(t));
    return out;
  };
}

Job prepare_intersection(const SystemSpec& system, Params& p, std::uint64_t seed) {
  const auto f = at_field(p.path("observable"), [&] { return parse_observable(p.required("observable"), system.dimension()); });
  const auto ladder = ladder_param(p, "ladder");
  const auto pair_spec = p.text("pairs", "random");
  const auto pair_count = p.count("pair_count", 20);
  const auto min_gap = p.count("min_gap", 5);
  const auto samples = p.count("samples", 1'000'000);
  const auto decay_samples = p.count("decay_samples", 1'000'000);
  const std::size_t K = ladder.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (pair_spec == "random") {
    if (K < min_gap + 2) config_invalid(p.path("min_gap"), "ladder too short for the requested gap");
    std::size_t possible = 0;
    for (std::size_t k = min_gap + 1; k < K; ++k) possible += k - min_gap;
    if (pair_count > possible) config_invalid(p.path("pair_count"), fmt::format("only {} distinct pairs exist", possible));
    CounterRng rng(derive_key(seed, stream::pairs, 0));
    std::set<std::pair<std::size_t, std::size_t>> seen;
    while (pairs.size() < pair_count) {
      const std::size_t k = min_gap + 1 + rng.next_word() % (K - 1 - min_gap);
      const std::size_t j = 1 + rng.next_word() % (k - min_gap);
      if (seen.insert({k, j}).second) pairs.emplace_back(k, j);
    }
  } else {
    for (auto tok : text::split(pair_spec, ',')) {
      const auto kj = text::split(tok, ':');
      if (kj.size() != 2) config_invalid(p.path("pairs"), "expected k:j entries");
      const auto k = parse_u64(kj[0], p.path("pairs")), j = parse_u64(kj[1], p.path("pairs"));
      if (!(k > j && j >= 1 && k < K)) config_invalid(p.path("pairs"), fmt::format("pair {}:{} needs {} > k > j >= 1", k, j, K));
      pairs.emplace_back(k, j);
    }
  }
  return [=](unsigned workers) {
    CorrelationOptions co;
    co.workers = workers;
    const auto decay = reference_decay(system, derive_key(seed, stream::correlation, 1), decay_samples, co);
    EstimatorOptions eo;
    eo.workers = workers;
    Output out;
    Json rows = Json::array();
    CsvTable t{"checks", {"k", "j", "lhs", "lhs_half_width", "product", "correlation_term", "rhs", "holds"}, {}};
    std::size_t holds = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto [k, j] = pairs[i];
      const auto c = intersection_bound_check(system, f, ladder, k, j, derive_key(seed, stream::intersection, i),
                                              samples, decay, eo);
      holds += c.holds;
      rows.push_back({{"k", k}, {"j", j}, {"lhs", c.lhs.value}, {"lhs_half_width", c.lhs.half_width},
                      {"product", c.product}, {"correlation_term", c.correlation_term}, {"rhs", c.rhs},
                      {"holds", c.holds}});
      t.rows.push_back({std::to_string(k), std::to_string(j), csv_number(c.lhs.value), csv_number(c.lhs.half_width),
                        csv_number(c.product), csv_number(c.correlation_term), csv_number(c.rhs),
                        c.holds ? "1" : "0"});
    }
    out.data["checks"] = std::move(rows);
    out.data["decay"] = decay_json(decay);
    out.summary["observable"] = f.label();
    out.summary["pairs"] = pairs.size();
    out.summary["holds"] = holds;
    out.summary["all_hold"] = holds == pairs.size();
    out.summary["decay"] = {{"class", to_string(decay.decay_class)}, {"rate", decay.rate}};
    out.tables.push_back(std::move(t));
    return out;
  };
}

Job prepare_return_stats(const SystemSpec& system, Params& p, std::uint64_t seed) {
  const auto f = at_field(p.path("observable"), [&] { return parse_observable(p.required("observable"), system.dimension()); });
  const double r = p.number("radius", 0.0);
  const auto samples = p.count("samples", 10'000);
  const auto cap = cap_param(p);
  const double l = p.number("l", 20.0);
  ReturnOptions ro;
  ro.measure_samples = p.count("measure_samples", 1'000'000);
  ro.confidence = p.number("confidence", 0.95);
  ro.cap = cap;
  if (!(r > 0.0)) config_invalid(p.path("radius"), "must be positive");
  if (!(l > 0.0)) config_invalid(p.path("l"), "must be positive");
  if (samples < 2) config_invalid(p.path("samples"), "need at least two samples");
  return [=](unsigned workers) {
    auto opts = ro;
    opts.workers = workers;
    const auto sample = return_times(system, f, r, derive_key(seed, stream::conditioned, 0), samples, opts);
    const auto curve = return_curve(sample, default_return_grid());
    const auto kac = kac_check(sample);
    const auto triv = triviality_indicator(sample, l, opts.confidence);
    const auto distinct = distinct_return_times(sample);
    const bool exact = closed_form_measure(system, f, r).has_value();
    Output out;
    CsvTable t{"curve", {"t", "g", "beyond_cap"}, {}};
    for (std::size_t i = 0; i < curve.t.size(); ++i) {
      t.rows.push_back({csv_number(curve.t[i]), csv_number(curve.g[i]), curve.beyond_cap[i] ? "1" : "0"});
    }
    std::vector<bool> beyond(curve.beyond_cap.begin(), curve.beyond_cap.end());
    out.data["curve"] = {{"t", curve.t}, {"g", curve.g}, {"beyond_cap", beyond}};
    out.data["tau"] = sample.tau;
    out.summary["observable"] = f.label();
    out.summary["radius"] = r;
    out.summary["measure"] = {{"value", sample.measure.value}, {"half_width", sample.measure.half_width}, {"exact", exact}};
    out.summary["samples"] = samples;
    out.summary["cap"] = sample.cap;
    out.summary["censored"] = sample.censored_count;
    out.summary["exp_law_distance"] = exp_law_distance(curve);
    out.summary["jump_clusters"] = jump_clusters(curve);
    out.summary["distinct_return_times"] = distinct.size();
    if (distinct.size() <= 20) out.summary["return_time_values"] = distinct;
    out.summary["kac"] = {{"product", kac.product}, {"std_error", kac.std_error}, {"censored", kac.censored},
                          {"consistent", kac.consistent}};
    const double bound = 1.0 / l + 3.0 * triv.half_width;
    out.summary["triviality"] = {{"l", l}, {"value", triv.value}, {"half_width", triv.half_width},
                                 {"ties", triv.ties}, {"bound", bound}, {"within_bound", triv.value <= bound}};
    out.tables.push_back(std::move(t));
    return out;
  };
}

Job prepare_flow(const SystemSpec& system, Params& p, std::uint64_t seed) {
  const std::size_t dim = system.dimension();
  const auto pi = at_field(p.path("projection"), [&] { return parse_observation_map(p.text("projection", "id"), dim); });
  if (!std::holds_alternative<Projection>(pi.rule())) config_invalid(p.path("projection"), "must be a projection");
  if (!std::holds_alternative<ToralAutomorphism>(system.kind())) {
    config_invalid("experiment.system", "flow-analogue needs a toral automorphism");
  }
  const auto points = p.count("points", 100);
  const auto n_max = p.count("n_max", 1'000'000);
  const auto per_decade = p.count("per_decade", 20);
  const auto target_spec = p.text("target", "random");
  std::vector<double> fixed_target;
  if (target_spec != "random") {
    fixed_target = at_field(p.path("target"), [&] { return text::to_doubles(target_spec, "target coordinate"); });
    if (fixed_target.size() != pi.codomain_dim()) config_invalid(p.path("target"), "wrong number of coordinates");
  }
  if (n_max < 1) config_invalid(p.path("n_max"), "must be at least 1");
  if (per_decade < 1) config_invalid(p.path("per_decade"), "must be at least 1");
  return [=](unsigned workers) {
    const auto grid = log_grid(n_max, per_decade);
    const auto starts = start_points(system, derive_key(seed, stream::points, 0), points);
    const auto targets = start_points(system, derive_key(seed, stream::points, 2), points);
    std::vector<std::optional<ApproachSeries>> series(points);
    parallel_for(points, workers, [&](std::size_t i) {
      auto target = fixed_target;
      if (target.empty()) target = pi.evaluate(targets[i].coords());
      series[i] = approach_series(system, pi, starts[i], target, grid);
    });
    Output out;
    Json rows = Json::array();
    CsvTable st{"series", {"point_id", "n", "d"}, {}};
    CsvTable et{"exponents", {"point_id", "exponent", "tail_max_ratio", "tail_median_ratio"}, {}};
    std::vector<double> ex, tmax, tmed;
    for (std::size_t i = 0; i < points; ++i) {
      const auto& s = *series[i];
      for (std::size_t g = 0; g < s.n.size(); ++g) {
        st.rows.push_back({std::to_string(i), std::to_string(s.n[g]), csv_number(s.d[g])});
      }
      et.rows.push_back({std::to_string(i), csv_number(s.exponent), csv_number(s.tail_max_ratio),
                         csv_number(s.tail_median_ratio)});
      ex.push_back(s.exponent);
      tmax.push_back(s.tail_max_ratio);
      tmed.push_back(s.tail_median_ratio);
      rows.push_back({{"point_id", i}, {"target", s.target}, {"d", s.d}, {"exponent", s.exponent},
                      {"tail_max_ratio", s.tail_max_ratio}, {"tail_median_ratio", s.tail_median_ratio}});
    }
    out.data["n"] = grid;
    out.data["points"] = std::move(rows);
    out.summary["projection"] = pi.label();
    out.summary["predicted"] = 1.0 / static_cast<double>(pi.codomain_dim());
    out.summary["n_max"] = n_max;
    out.summary["exponent"] = stats_json(ex);
    out.summary["tail_max_ratio"] = stats_json(tmax);
    out.summary["tail_median_ratio"] = stats_json(tmed);
    out.tables.push_back(std::move(st));
    out.tables.push_back(std::move(et));
    return out;
  };
}

using Preparer = Job (*)(const SystemSpec&, Params&, std::uint64_t);

Preparer preparer_for(const std::string& kind) {
  if (kind == "dimension") return prepare_dimension;
  if (kind == "hitting") return prepare_hitting;
  if (kind == "borel-cantelli") return prepare_borel_cantelli;
  if (kind == "correlation") return prepare_correlation;
  if (kind == "intersection-bound") return prepare_intersection;
  if (kind == "return-stats") return prepare_return_stats;
  if (kind == "observed") return prepare_observed;
  if (kind == "flow-analogue") return prepare_flow;
  config_invalid("experiment.kind", fmt::format("unknown experiment kind '{}'", kind));
}

}  // namespace

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds{"dimension",    "hitting",      "borel-cantelli",
                                              "correlation",  "intersection-bound", "return-stats",
                                              "observed",     "flow-analogue"};
  return kinds;
}

ExperimentConfig parse_config(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    config_invalid(fmt::format("line {}", e.line()), e.message());
  }
  const auto exp = tree.get_child_optional("experiment");
  if (!exp) config_invalid("experiment", "missing [experiment] section");
  ExperimentConfig cfg;
  std::map<std::string, std::string> head;
  for (const auto& [k, v] : *exp) head[k] = v.data();
  Params ep("experiment", head);
  cfg.kind = ep.required("kind");
  preparer_for(cfg.kind);
  cfg.system = ep.required("system");
  cfg.seed = parse_u64(ep.required("seed"), "experiment.seed");
  cfg.precision_bits = static_cast<int>(ep.count("precision_bits", 512));
  cfg.output = ep.text("output", "");
  ep.finish();
  for (const auto& [name, section] : tree) {
    if (name == "experiment") continue;
    if (name != cfg.kind) config_invalid(name, fmt::format("section does not match kind '{}'", cfg.kind));
    if (!section.data().empty()) config_invalid(name, "expected a section");
    for (const auto& [k, v] : section) cfg.params[k] = v.data();
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_invalid("config", fmt::format("cannot read '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

ExperimentResult run(const ExperimentConfig& config, const RunOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto prep = preparer_for(config.kind);
  if (config.precision_bits < 64 || config.precision_bits % 64 != 0) {
    config_invalid("experiment.precision_bits", "must be a positive multiple of 64");
  }
  const auto system = at_field("experiment.system", [&] { return parse_system(config.system, config.precision_bits); });
  Params p(config.kind, config.params);
  const Job job = prep(system, p, config.seed);
  p.finish();

  const unsigned workers = options.workers ? options.workers : default_workers();
  Output out = job(workers);

  Json echo;
  echo["kind"] = config.kind;
  echo["system"] = config.system;
  echo["seed"] = config.seed;
  echo["precision_bits"] = config.precision_bits;
  echo["params"] = Json(config.params);

  ExperimentResult result;
  auto& doc = result.document;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = config.kind;
  doc["config"] = std::move(echo);
  doc["engine"] = {{"system_id", system.id()},
                   {"exact", system.exact_engine()},
                   {"arithmetic", system.exact_engine() ? "fixed-point" : "float64"},
                   {"precision_bits", system.precision_bits()},
                   {"mixing_class", to_string(system.mixing_class())}};
  doc["data"] = std::move(out.data);
  doc["summary"] = std::move(out.summary);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  doc["runtime"] = {{"workers", workers}, {"wall_time_seconds", secs}};
  result.tables = std::move(out.tables);
  return result;
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{:.17g}", v);
}

std::string to_csv(const CsvTable& table) {
  std::string out;
  for (std::size_t i = 0; i < table.header.size(); ++i) out += (i ? "," : "") + table.header[i];
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
    out += '\n';
  }
  return out;
}

void write_atomic(const std::filesystem::path& path, std::string_view contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += fmt::format(".tmp{}", std::chrono::steady_clock::now().time_since_epoch().count());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorCode::InvalidArgument, fmt::format("cannot write '{}'", path.string()));
    }
  }
  fs::rename(tmp, path);
}

void write_result(const ExperimentResult& result, const std::filesystem::path& path) {
  auto stem = path;
  stem.replace_extension();
  for (const auto& t : result.tables) {
    write_atomic(stem.string() + "." + t.name + ".csv", to_csv(t));
  }
  write_atomic(path, result.document.dump(2) + "\n");
}

Json error_record(const std::exception& e) {
  Json rec;
  if (const auto* he = dynamic_cast<const Error*>(&e)) {
    rec["error"] = std::string(to_string(he->code()));
    rec["where"] = he->where();
  } else {
    rec["error"] = "internal";
    rec["where"] = "";
  }
  rec["message"] = e.what();
  return rec;
}

Json load_result(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::SchemaMismatch, fmt::format("cannot read result '{}'", path.string()));
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::SchemaMismatch, fmt::format("'{}' is not a result document: {}", path.string(), e.what()));
  }
}

}  // namespace hitlab

#include <cmath>
#include <set>

#include <fmt/format.h>

#include "hitlab/dynamics.hpp"
#include "hitlab/error.hpp"
#include "hitlab/harness.hpp"

namespace hitlab {

namespace {

double num(const Json& j, std::initializer_list<const char*> path) {
  const Json* cur = &j;
  for (const char* key : path) {
    if (!cur->is_object() || !cur->contains(key)) return std::nan("");
    cur = &(*cur)[key];
  }
  return cur->is_number() ? cur->get<double>() : std::nan("");
}

std::string str(const Json& j, std::initializer_list<const char*> path) {
  const Json* cur = &j;
  for (const char* key : path) {
    if (!cur->is_object() || !cur->contains(key)) return "";
    cur = &(*cur)[key];
  }
  return cur->is_string() ? cur->get<std::string>() : cur->dump();
}

std::string fixed(double v) { return std::isnan(v) ? "n/a" : fmt::format("{:.3f}", v); }

struct Section {
  std::string title;
  CsvTable table;
};

void add_row(Section& s, std::vector<std::string> row) { s.table.rows.push_back(std::move(row)); }

std::string render(const Section& s) {
  std::vector<std::size_t> width(s.table.header.size());
  for (std::size_t c = 0; c < width.size(); ++c) {
    width[c] = s.table.header[c].size();
    for (const auto& row : s.table.rows) width[c] = std::max(width[c], row[c].size());
  }
  auto line = [&](const std::vector<std::string>& row) {
    std::string out;
    for (std::size_t c = 0; c < row.size(); ++c) out += fmt::format("{}{:<{}}", c ? " | " : "", row[c], width[c]);
    return out + "\n";
  };
  std::string out = s.title + "\n" + line(s.table.header);
  std::string rule;
  for (std::size_t c = 0; c < width.size(); ++c) rule += (c ? "-+-" : "") + std::string(width[c], '-');
  out += rule + "\n";
  for (const auto& row : s.table.rows) out += line(row);
  return out + "\n";
}

}  // namespace

Report report(const std::vector<Json>& results) {
  if (results.empty()) throw Error(ErrorCode::SchemaMismatch, "report needs at least one result");
  std::set<std::string> versions;
  for (const auto& r : results) {
    versions.insert(r.is_object() && r.contains("schema_version") ? r["schema_version"].dump() : "missing");
  }
  const std::string current = std::to_string(kSchemaVersion);
  if (versions.size() != 1 || *versions.begin() != current) {
    std::string seen;
    for (const auto& v : versions) seen += (seen.empty() ? "" : ", ") + v;
    throw Error(ErrorCode::SchemaMismatch,
                fmt::format("result schema versions [{}] do not all match version {}", seen, current));
  }

  Section exponent{"Hitting exponents against sublevel dimension",
                   {"exponents", {"run", "system", "target", "R_upper", "R_lower", "d_upper", "d_lower", "inequality"}, {}}};
  Section bc{"Borel-Cantelli counters",
             {"borel_cantelli", {"run", "system", "observable", "k_max", "E(Z_k)", "mean Z/E", "median Z/E", "in [0.8,1.2]"}, {}}};
  Section corr{"Correlation decay", {"decay", {"run", "system", "phi", "psi", "class", "rate"}, {}}};
  Section inter{"Intersection bound", {"intersection", {"run", "system", "observable", "pairs", "holding", "decay"}, {}}};
  Section ret{"Return-time statistics",
              {"returns", {"run", "system", "observable", "r", "sup|g-e^-t|", "clusters", "Kac", "Kac ok", "trivial(l)"}, {}}};
  Section flow{"Approach-distance exponents",
               {"flow", {"run", "system", "projection", "predicted", "median", "tail max", "tail median"}, {}}};
  Section dim{"Sublevel dimension", {"dimension", {"run", "system", "observable", "d_upper", "d_lower", "slope"}, {}}};

  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    const auto& s = r["summary"];
    const std::string run = std::to_string(i + 1);
    const std::string system = str(r, {"config", "system"});
    const std::string kind = str(r, {"kind"});
    if (kind == "hitting" || kind == "observed") {
      const double up = num(s, {"R_upper", "median"}), lo = num(s, {"R_lower", "median"});
      const double du = num(s, {"dimension", "d_upper"}), dl = num(s, {"dimension", "d_lower"});
      std::string flag = "n/a";
      if (!std::isnan(up) && !std::isnan(lo) && !std::isnan(du) && !std::isnan(dl)) {
        flag = (lo >= dl - 0.15 && up >= du - 0.15) ? "holds" : "violated";
      }
      add_row(exponent, {run, system, kind == "hitting" ? str(s, {"observable"}) : "F=" + str(s, {"map"}), fixed(up),
                         fixed(lo), fixed(du), fixed(dl), flag});
    } else if (kind == "borel-cantelli") {
      add_row(bc, {run, system, str(s, {"observable"}), str(s, {"k_max"}), fixed(num(s, {"EZ_final"})),
                   fixed(num(s, {"final_ratio", "mean"})), fixed(num(s, {"final_ratio", "median"})),
                   fixed(num(s, {"fraction_in_band"}))});
    } else if (kind == "correlation") {
      add_row(corr, {run, system, str(s, {"phi"}), str(s, {"psi"}), str(s, {"decay", "class"}),
                     fixed(num(s, {"decay", "rate"}))});
    } else if (kind == "intersection-bound") {
      add_row(inter, {run, system, str(s, {"observable"}), str(s, {"pairs"}), str(s, {"holds"}),
                      str(s, {"decay", "class"})});
    } else if (kind == "return-stats") {
      add_row(ret, {run, system, str(s, {"observable"}), fmt::format("{:g}", num(s, {"radius"})),
                    fixed(num(s, {"exp_law_distance"})), str(s, {"jump_clusters"}), fixed(num(s, {"kac", "product"})),
                    str(s, {"kac", "consistent"}), fixed(num(s, {"triviality", "value"}))});
    } else if (kind == "flow-analogue") {
      add_row(flow, {run, system, str(s, {"projection"}), fixed(num(s, {"predicted"})),
                     fixed(num(s, {"exponent", "median"})), fixed(num(s, {"tail_max_ratio", "median"})),
                     fixed(num(s, {"tail_median_ratio", "median"}))});
    } else if (kind == "dimension") {
      add_row(dim, {run, system, str(s, {"observable"}), fixed(num(s, {"dimension", "d_upper"})),
                    fixed(num(s, {"dimension", "d_lower"})), fixed(num(s, {"dimension", "slope"}))});
    } else {
      throw Error(ErrorCode::SchemaMismatch, fmt::format("result {} has unknown kind '{}'", i + 1, kind));
    }
  }

  Report rep;
  rep.text = fmt::format("hitlab report: {} result(s), schema version {}\n\n", results.size(), kSchemaVersion);
  for (auto* s : {&exponent, &bc, &corr, &inter, &ret, &flow, &dim}) {
    if (s->table.rows.empty()) continue;
    rep.text += render(*s);
    rep.tables.push_back(s->table);
  }
  return rep;
}

std::string catalog_listing() {
  std::string out = "Systems\n";
  const std::vector<std::pair<std::string, std::string>> systems{
      {"doubling", "x -> 2x mod 1 on an exact bit reservoir"},
      {"doubling:fixed", "doubling on B-bit fixed point (finite orbit budget)"},
      {"cat", "[[2,1],[1,1]] on T^2, exact fixed point"},
      {"toral:2,1,1,1", "any integer matrix with |det| = 1, row-major"},
      {"rotation:golden", "x -> x + (sqrt 5 - 1)/2, exact to B bits"},
      {"rotation:liouville", "x -> x + sum_{n<=6} 10^-n!, exact to B bits"},
      {"rotation:0.25", "decimal rotation number in [0,1)"},
      {"mp:0.5", "Manneville-Pomeau x + x^(1+s) mod 1, s in (0,1)"},
  };
  for (const auto& [id, what] : systems) {
    const auto sys = parse_system(id);
    out += fmt::format("  {:<20} mixing={:<12} engine={:<11} {}\n", id, to_string(sys.mixing_class()),
                       sys.exact_engine() ? "fixed-point" : "float64", what);
    if (!sys.exact_engine()) {
      out += fmt::format("  {:<20} caveat: double-precision orbits are not exact; statistics rely on\n"
                         "  {:<20} the shadowing heuristic and an exact 0 is replaced by 2^-53\n", "", "");
    }
  }
  out += "\nObservables (f >= 0, target S_r = {f <= r})\n"
         "  dist:<p>               distance to a point, e.g. dist:0.375, dist:0.5,0.5\n"
         "  projdist:<c>:<p>       distance after projecting to coordinates c (1-based)\n"
         "  pushdist:<map>:<y>     distance between F(x) and y in the codomain of F\n"
         "  fat:<offset>:<rule>    max(0, f - offset)\n"
         "  sum:<w>*<rule>;...     weighted sum of rules\n";
  out += "\nObservation maps\n"
         "  proj:<c>, proj<c>, id  coordinate projections (periodic codomain)\n"
         "  linear:[[a,b],[c,d]]   linear map into R^m\n"
         "  smooth:sine            sin(2 pi x_1)\n"
         "  smooth:twist           (x + sin(2 pi y)/4, y)\n"
         "  smooth:graph           (x, sin(2 pi x))\n"
         "  const:<v>              constant map\n";
  out += "\nTest functions for correlations\n"
         "  cos:<c>:<freq>, ramp:<c>:<steepness>, const:<v>, or any observable rule\n";
  out += "\nExperiment kinds\n ";
  for (const auto& k : experiment_kinds()) out += " " + k;
  return out + "\n";
}

}  // namespace hitlab

// Runs the acceptance corpus from configs/ and prints one PASS/FAIL line per
// criterion. Result files and a report are written under --out.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "hitlab/harness.hpp"
#include "hitlab/observed.hpp"
#include "hitlab/random.hpp"

using namespace hitlab;
namespace fs = std::filesystem;

namespace {

struct Corpus {
  fs::path config_dir;
  fs::path out_dir;
  unsigned workers = 0;
  std::map<std::string, Json> results;

  const Json& get(const std::string& name) {
    auto it = results.find(name);
    if (it != results.end()) return it->second;
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run(load_config(config_dir / (name + ".ini")), {workers});
    write_result(r, out_dir / (name + ".json"));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << fmt::format("  ran {} in {:.1f}s\n", name, secs);
    // Read back so every check sees exactly the persisted document.
    return results.emplace(name, load_result(out_dir / (name + ".json"))).first->second;
  }
};

double med(const Json& r, const char* field) {
  const auto& v = r["summary"][field]["median"];
  return v.is_number() ? v.get<double>() : std::nan("");
}

bool within(double v, double lo, double hi) { return v >= lo && v <= hi; }

int failures = 0;

void verdict(int n, bool ok, const std::string& detail) {
  failures += !ok;
  std::cout << fmt::format("{} criterion {}: {}", ok ? "PASS" : "FAIL", n, detail) << std::endl;
}

template <class Fn>
void criterion(int n, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    verdict(n, false, fmt::format("error: {}", error_record(e).dump()));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hitlab acceptance suite"};
  Corpus corpus;
  corpus.config_dir = HITLAB_CONFIG_DIR;
  std::string out = "acceptance";
  app.add_option("--out", out, "Directory for result files");
  app.add_option("--configs", corpus.config_dir, "Directory holding the corpus configs");
  app.add_option("--workers", corpus.workers, "Worker threads for the main runs");
  CLI11_PARSE(app, argc, argv);
  corpus.out_dir = out;
  fs::create_directories(corpus.out_dir);

  criterion(1, [&] {
    const auto& r = corpus.get("doubling_hitting");
    const double up = med(r, "R_upper"), lo = med(r, "R_lower");
    verdict(1, within(up, 0.85, 1.15) && within(lo, 0.85, 1.15),
            fmt::format("doubling ball: median R_upper {:.3f}, R_lower {:.3f} (target 1 +- 0.15)", up, lo));
  });

  criterion(2, [&] {
    const auto& r = corpus.get("cat_hitting");
    const double up = med(r, "R_upper"), lo = med(r, "R_lower");
    verdict(2, within(up, 1.7, 2.3) && within(lo, 1.7, 2.3),
            fmt::format("cat ball: median R_upper {:.3f}, R_lower {:.3f} (target [1.7, 2.3])", up, lo));
  });

  criterion(3, [&] {
    std::vector<Json> docs;
    for (const char* name : {"doubling_hitting", "doubling_hitting_refined", "cat_hitting", "golden_hitting",
                             "liouville_hitting", "mp5_hitting", "mp25_hitting", "cat_observed"}) {
      docs.push_back(corpus.get(name));
    }
    const auto rep = report(docs);
    const auto& rows = rep.tables.at(0).rows;
    std::size_t holds = 0;
    std::string worst;
    for (const auto& row : rows) {
      if (row.back() == "holds") {
        ++holds;
      } else {
        worst += fmt::format(" [{} {}: {}]", row[1], row[2], row.back());
      }
    }
    verdict(3, holds == rows.size() && rows.size() == docs.size(),
            fmt::format("R >= d - 0.15 in {}/{} corpus runs{}", holds, docs.size(), worst));
  });

  criterion(4, [&] {
    const auto& r = corpus.get("doubling_borel_cantelli");
    const double frac = r["summary"]["fraction_in_band"].get<double>();
    const double m = r["summary"]["final_ratio"]["mean"].get<double>();
    verdict(4, frac >= 0.9 && within(m, 0.95, 1.05),
            fmt::format("Z_k/E(Z_k) at k = 1e5: {:.0f}% of points in [0.8, 1.2], mean {:.4f}", 100 * frac, m));
  });

  criterion(5, [&] {
    const auto& r = corpus.get("doubling_intersection");
    const auto holds = r["summary"]["holds"].get<std::size_t>();
    const auto pairs = r["summary"]["pairs"].get<std::size_t>();
    verdict(5, holds == pairs && pairs == 20,
            fmt::format("intersection bound holds for {}/{} random (k, j) pairs", holds, pairs));
  });

  criterion(6, [&] {
    const auto& d = corpus.get("doubling_returns");
    const auto& g = corpus.get("golden_returns");
    const double dist = d["summary"]["exp_law_distance"].get<double>();
    const auto clusters = g["summary"]["jump_clusters"].get<std::size_t>();
    verdict(6, dist <= 0.1 && clusters <= 3,
            fmt::format("doubling sup|g - e^-t| = {:.4f}; golden curve has {} jump clusters", dist, clusters));
  });

  criterion(7, [&] {
    bool ok = true;
    std::string detail;
    for (const char* name : {"doubling_returns", "cat_returns", "golden_returns", "liouville_returns"}) {
      const auto& s = corpus.get(name)["summary"];
      const bool kac = s["kac"]["consistent"].get<bool>();
      const bool triv = s["triviality"]["within_bound"].get<bool>();
      ok = ok && kac && triv && s["measure"]["exact"].get<bool>();
      detail += fmt::format(" [{}: Kac {:.3f} +- {:.3f}, trivial(20) {:.4f}]", corpus.results.at(name)["config"]["system"].get<std::string>(),
                            s["kac"]["product"].get<double>(), s["kac"]["std_error"].get<double>(),
                            s["triviality"]["value"].get<double>());
    }
    verdict(7, ok, "exact-measure systems:" + detail);
  });

  criterion(8, [&] {
    const auto cat = SystemSpec::cat();
    // Definitional identity on randomized inputs.
    const std::vector<std::string> maps{"id", "proj:1", "proj:2", "linear:[[1,0],[2,0]]", "smooth:twist", "smooth:graph",
                                        "smooth:sine"};
    std::size_t equal = 0;
    for (std::uint64_t i = 0; i < 1000; ++i) {
      const auto F = parse_observation_map(maps[i % maps.size()], 2);
      const auto x = invariant_sample(cat, derive_key(1, stream::points, 10), i);
      const auto x0 = invariant_sample(cat, derive_key(1, stream::points, 11), i).coords();
      const double r = 0.01 + 0.1 * unit_from_word(random_word(derive_key(1, stream::points, 12), i));
      const auto a = observed_hitting_time(cat, x, x0, F, r, 10'000, i);
      const auto b = hitting_time(cat, x, Observable::pushforward_from(F, x0), r, 10'000, i);
      equal += a.tau == b.tau && a.censored == b.censored;
    }

    // Rank-dimension agreement for every catalog map under Lebesgue.
    const auto ladder = RadiusLadder::dyadic(5, 11);
    const auto base = sample_invariant_coords(cat, derive_key(1, stream::points, 13), 50);
    bool ranks_ok = true;
    std::string rank_detail;
    for (const char* m : {"id", "proj:1", "proj:2", "linear:[[1,0],[2,0]]", "smooth:sine", "smooth:twist",
                          "smooth:graph", "const:0.5"}) {
      const auto F = parse_observation_map(m, 2);
      EstimatorOptions eo;
      eo.workers = corpus.workers;
      const auto dims = pushforward_dimensions(cat, F, base, ladder, derive_key(1, stream::invariant, 13), 1'000'000, eo);
      std::size_t agree = 0;
      for (std::size_t i = 0; i < 50; ++i) {
        const auto rank = jacobian_rank(F, std::span<const double>(base).subspan(2 * i, 2)).rank;
        agree += std::fabs(dims[i].slope - static_cast<double>(rank)) <= 0.25;
      }
      ranks_ok = ranks_ok && agree >= 45;
      rank_detail += fmt::format(" {}={}/50", m, agree);
    }

    const auto& obs = corpus.get("cat_observed");
    const double up = med(obs, "R_upper"), lo = med(obs, "R_lower");
    const bool corollary = within(up, 0.8, 1.2) && within(lo, 0.8, 1.2);
    verdict(8, equal == 1000 && ranks_ok && corollary,
            fmt::format("identity {}/1000; rank agreement{}; cat proj:1 median R {:.3f}/{:.3f}", equal, rank_detail,
                        up, lo));
  });

  criterion(9, [&] {
    const auto& r = corpus.get("cat_flow");
    const double m = med(r, "exponent");
    verdict(9, within(m, 0.4, 0.6),
            fmt::format("cat map, identity projection, n <= 1e6: median exponent {:.3f} (target [0.4, 0.6]); "
                        "median tail max {:.3f}, tail median {:.3f}",
                        m, med(r, "tail_max_ratio"), med(r, "tail_median_ratio")));
  });

  criterion(10, [&] {
    const auto& a = corpus.get("doubling_hitting");
    const auto& b = corpus.get("doubling_hitting_refined");
    const double du = std::fabs(med(a, "R_upper") - med(b, "R_upper"));
    const double dl = std::fabs(med(a, "R_lower") - med(b, "R_lower"));
    verdict(10, du <= 0.1 && dl <= 0.1,
            fmt::format("refined ladder shifts median R_upper by {:.3f}, R_lower by {:.3f}", du, dl));
  });

  criterion(11, [&] {
    bool same = true;
    std::string detail;
    for (const char* name : {"cat_hitting", "doubling_returns", "doubling_borel_cantelli", "doubling_intersection"}) {
      const auto cfg = load_config(corpus.config_dir / (std::string(name) + ".ini"));
      const auto one = run(cfg, {1}).document["data"].dump();
      const auto four = run(cfg, {4}).document["data"].dump();
      same = same && one == four;
      detail += fmt::format(" {}:{}", name, one == four ? "identical" : "differs");
    }
    verdict(11, same, "workers 1 vs 4 data sections:" + detail);
  });

  std::vector<Json> all;
  for (const auto& [name, doc] : corpus.results) all.push_back(doc);
  const auto rep = report(all);
  write_atomic(corpus.out_dir / "report.txt", rep.text);
  for (const auto& t : rep.tables) write_atomic(corpus.out_dir / ("report." + t.name + ".csv"), to_csv(t));

  std::cout << fmt::format("{} criteria failed", failures) << std::endl;
  return failures == 0 ? 0 : 1;
}

#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "hitlab/error.hpp"
#include "hitlab/harness.hpp"
#include "hitlab/observables.hpp"
#include "hitlab/random.hpp"

using namespace hitlab;
namespace fs = std::filesystem;

namespace {

const char* kDimension =
    "[experiment]\nkind = dimension\nsystem = doubling\nseed = 7\n"
    "[dimension]\nobservable = dist:0.5\nladder = dyadic:3:12\nsamples = 1000\n";

std::string config_error_field(const std::string& text) {
  try {
    run(parse_config(text));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) return e.where();
    return "other:" + std::string(to_string(e.code()));
  }
  return "none";
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse_config(kDimension);
  CHECK(c.kind == "dimension");
  CHECK(c.system == "doubling");
  CHECK(c.seed == 7);
  CHECK(c.params.at("ladder") == "dyadic:3:12");
}

TEST_CASE("invalid configs name the offending field") {
  CHECK(config_error_field("[experiment]\nkind = dimension\nsystem = doubling\n") == "experiment.seed");
  CHECK(config_error_field("[experiment]\nkind = nope\nsystem = doubling\nseed = 1\n") == "experiment.kind");
  CHECK(config_error_field("[experiment]\nkind = dimension\nsystem = tent\nseed = 1\n[dimension]\nobservable = dist:0.5\nladder = dyadic:3:9\n") ==
        "experiment.system");
  CHECK(config_error_field("[experiment]\nkind = dimension\nsystem = doubling\nseed = 1\n[dimension]\nobservable = dist:0.5\nladder = 0.5,0.01,0.005,0.001\n") ==
        "dimension.ladder");
  CHECK(config_error_field("[experiment]\nkind = dimension\nsystem = doubling\nseed = 1\n[dimension]\nobservable = dist:0.5\nladder = dyadic:3:9\ncolour = red\n") ==
        "dimension.colour");
  CHECK(config_error_field("[experiment]\nkind = dimension\nsystem = doubling\nseed = 1\n[hitting]\nobservable = dist:0.5\n") ==
        "hitting");
  CHECK(config_error_field("[experiment]\nkind = hitting\nsystem = doubling\nseed = 1\n[hitting]\nobservable = wobble\nladder = dyadic:3:9\n") ==
        "hitting.observable");
  CHECK(config_error_field("[experiment]\nkind = flow-analogue\nsystem = doubling\nseed = 1\n") == "experiment.system");
}

TEST_CASE("dimension run delegates to the estimator") {
  RunOptions o;
  o.workers = 1;
  const auto r = run(parse_config(kDimension), o);
  const auto d = estimate_dimension(parse_observable("dist:0.5", 1), RadiusLadder::dyadic(3, 12), SystemSpec::doubling(),
                                    derive_key(7, stream::invariant, 0), 1000);
  CHECK(r.document["summary"]["dimension"]["slope"].get<double>() == d.slope);
  CHECK(r.document["schema_version"] == kSchemaVersion);
  CHECK(r.document["engine"]["exact"] == true);
  CHECK(r.document["config"]["params"]["ladder"] == "dyadic:3:12");
}

TEST_CASE("data sections do not depend on the worker count") {
  const auto cfg = parse_config(
      "[experiment]\nkind = hitting\nsystem = cat\nseed = 3\n"
      "[hitting]\nobservable = dist:0.3,0.6\nladder = dyadic:2:6\npoints = 30\n");
  RunOptions one, four;
  one.workers = 1;
  four.workers = 4;
  const auto a = run(cfg, one).document;
  const auto b = run(cfg, four).document;
  CHECK(a["data"].dump() == b["data"].dump());
  CHECK(a["summary"].dump() == b["summary"].dump());
}

TEST_CASE("results are written atomically with CSV companions") {
  const auto dir = fs::temp_directory_path() / "hitlab_harness_test";
  fs::remove_all(dir);
  const auto r = run(parse_config(kDimension));
  write_result(r, dir / "dim.json");
  CHECK(fs::exists(dir / "dim.json"));
  CHECK(fs::exists(dir / "dim.rungs.csv"));
  for (const auto& e : fs::directory_iterator(dir)) CHECK(e.path().string().find(".tmp") == std::string::npos);
  const auto back = load_result(dir / "dim.json");
  CHECK(back["data"] == Json::parse(r.document["data"].dump()));
  std::ifstream csv(dir / "dim.rungs.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "r,measure,half_width,used");
  fs::remove_all(dir);
}

TEST_CASE("csv numbers round-trip") {
  const double v = 0.1 + 0.2;
  CHECK(std::stod(csv_number(v)) == v);
  CHECK(csv_number(1.0 / 3.0) == "0.33333333333333331");
}

TEST_CASE("report flags come from the stored fits") {
  Json r{{"schema_version", kSchemaVersion},
         {"kind", "hitting"},
         {"config", {{"system", "doubling"}}},
         {"summary",
          {{"observable", "dist:0.375"},
           {"R_upper", {{"median", 0.99}}},
           {"R_lower", {{"median", 0.98}}},
           {"dimension", {{"d_upper", 1.0}, {"d_lower", 1.0}}}}}};
  auto rep = report({r});
  CHECK(rep.text.find("holds") != std::string::npos);
  r["summary"]["R_lower"]["median"] = 0.5;
  rep = report({r});
  CHECK(rep.text.find("violated") != std::string::npos);
  CHECK(rep.tables.at(0).rows.at(0).back() == "violated");

  CHECK_THROWS_AS(report({}), Error);
  Json old = r;
  old["schema_version"] = 0;
  try {
    report({r, old});
    FAIL("expected schema mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaMismatch);
    CHECK(std::string(e.what()).find("0") != std::string::npos);
  }
}

TEST_CASE("catalog listing") {
  const auto text = catalog_listing();
  for (const char* id : {"doubling", "cat", "rotation:golden", "rotation:liouville", "mp:0.5", "caveat"}) {
    CHECK(text.find(id) != std::string::npos);
  }
}

TEST_CASE("selftest passes") {
  for (const auto& tc : selftest()) {
    CAPTURE(tc.name);
    CAPTURE(tc.detail);
    CHECK(tc.passed);
  }
}

TEST_CASE("error records are structured") {
  const Error e(ErrorCode::ConfigInvalid, "bad", "hitting.ladder");
  const auto rec = error_record(e);
  CHECK(rec["error"] == "config-invalid");
  CHECK(rec["where"] == "hitting.ladder");
}

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "hitlab/error.hpp"
#include "hitlab/harness.hpp"
#include "hitlab/parallel.hpp"

namespace fs = std::filesystem;

namespace {

int fail(const std::exception& e) {
  std::cerr << hitlab::error_record(e).dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hitlab: hitting-time, dimension and recurrence experiments"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  unsigned workers = 0;
  std::optional<int> precision_bits;
  app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--workers", workers, "Worker threads (0: HITLAB_WORKERS or hardware concurrency)");
  app.add_option("--precision-bits", precision_bits, "Fixed-point precision B (multiple of 64)");

  auto* catalog = app.add_subcommand("catalog", "List systems, observables and observation maps");

  auto* run = app.add_subcommand("run", "Run one experiment config");
  std::string config_path;
  std::string run_out;
  run->add_option("config", config_path, "INI config file")->required();
  run->add_option("--out", run_out, "Result path (defaults to the config's output key)");

  auto* rep = app.add_subcommand("report", "Summarize result files");
  std::vector<std::string> inputs;
  std::string report_out;
  rep->add_option("results", inputs, "Result JSON files");
  rep->add_option("--out", report_out, "Write the report here, with CSV companions");

  auto* self = app.add_subcommand("selftest", "Run the built-in examples");

  CLI11_PARSE(app, argc, argv);
  hitlab::set_default_workers(workers);

  try {
    if (*catalog) {
      std::cout << hitlab::catalog_listing();
      return 0;
    }
    if (*run) {
      auto cfg = hitlab::load_config(config_path);
      if (seed) cfg.seed = *seed;
      if (precision_bits) cfg.precision_bits = *precision_bits;
      const std::string out = run_out.empty() ? cfg.output : run_out;
      if (out.empty()) {
        throw hitlab::Error(hitlab::ErrorCode::ConfigInvalid, "no output path: set experiment.output or --out",
                            "experiment.output");
      }
      const auto result = hitlab::run(cfg, {workers});
      hitlab::write_result(result, out);
      std::cout << out << "\n";
      return 0;
    }
    if (*rep) {
      std::vector<hitlab::Json> docs;
      for (const auto& path : inputs) docs.push_back(hitlab::load_result(path));
      const auto r = hitlab::report(docs);
      if (report_out.empty()) {
        std::cout << r.text;
        return 0;
      }
      auto stem = fs::path(report_out);
      stem.replace_extension();
      for (const auto& t : r.tables) hitlab::write_atomic(stem.string() + "." + t.name + ".csv", hitlab::to_csv(t));
      hitlab::write_atomic(report_out, r.text);
      std::cout << report_out << "\n";
      return 0;
    }
    if (*self) {
      int failed = 0;
      for (const auto& tc : hitlab::selftest()) {
        std::cout << (tc.passed ? "PASS " : "FAIL ") << tc.name << " (" << tc.detail << ")\n";
        failed += !tc.passed;
      }
      return failed == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    return fail(e);
  }
  return 1;
}

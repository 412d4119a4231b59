// chaoslab <experiment> --config <path> [--set key=value ...] --out <dir> --threads N --seed S
//
// Exit codes: 0 success, 2 configuration error, 3 selftest failure,
// 1 any other runtime failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chaoslab/harness/config.hpp"
#include "chaoslab/harness/runners.hpp"

namespace h = chaoslab::harness;

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random-feature universality experiments"};
  std::string experiment, config_path, out_dir;
  std::vector<std::string> sets;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  app.add_option("experiment", experiment, "lossgrid | marginal | boundary | phase | descent | diagnose | selftest")
      ->required();
  app.add_option("--config", config_path, "JSON config merged over the experiment defaults");
  app.add_option("--set", sets, "dot-path override, e.g. --set solver.tol=1e-10")->take_all();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads");
  app.add_option("--seed", seed, "master seed");
  app.add_flag_callback("--print-defaults", [&] {
    if (!h::is_experiment(experiment)) throw CLI::ValidationError("unknown experiment " + experiment);
    std::cout << h::default_config(experiment).dump(2) << '\n';
    throw CLI::Success();
  }, "print the default config for the experiment and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  h::json cfg;
  try {
    if (threads) sets.push_back("threads=" + std::to_string(*threads));
    if (seed) sets.push_back("master_seed=" + std::to_string(*seed));
    const h::json user = config_path.empty() ? h::json() : h::load_json_file(config_path);
    cfg = h::resolve_config(experiment, user, sets);
    if (!out_dir.empty()) cfg["output"] = out_dir;
    std::filesystem::create_directories(cfg.at("output").get<std::string>());
  } catch (const chaoslab::config_error& e) {
    std::cerr << "chaoslab: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "chaoslab: " << e.what() << '\n';
    return 2;
  }

  const std::filesystem::path dir = cfg.at("output").get<std::string>();
  try {
    write_file(dir / "config.resolved.json", cfg.dump(2) + "\n");
    const auto result = h::run_experiment(cfg);
    std::ofstream csv(dir / "results.csv", std::ios::binary);
    result.table.write_csv(csv, h::config_hash(cfg), cfg.at("master_seed").get<std::uint64_t>());
    h::json diag = result.diagnostics;
    diag["config_hash"] = h::config_hash(cfg);
    write_file(dir / "diagnostics.json", diag.dump(2) + "\n");
    std::cerr << "chaoslab: " << experiment << " wrote " << result.table.rows().size() << " rows to " << dir.string()
              << " in " << diag["runtime_seconds"].get<double>() << " s\n";
    if (result.selftest_failed) {
      for (const auto& f : diag["failures"]) std::cerr << "chaoslab: selftest failure: " << f.get<std::string>() << '\n';
      return 3;
    }
  } catch (const chaoslab::config_error& e) {
    std::cerr << "chaoslab: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "chaoslab: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fcifem/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Field-aligned finite element experiments"};
  app.require_subcommand(1);
  CLI::App* run = app.add_subcommand("run", "Run the experiment described by a JSON config file");
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  int threads = 0;
  long long seed = -1;
  run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  run->add_option("--override", overrides, "Dotted key=value applied to the config")->take_all();
  run->add_option("--threads", threads, "Worker threads for assembly and sampling")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Seed for random test-point sampling")->check(CLI::NonNegativeNumber);
  CLI11_PARSE(app, argc, argv);

  if (!out_dir.empty()) overrides.push_back("output_dir=" + nlohmann::json(out_dir).dump());
  if (threads > 0) overrides.push_back("threads=" + std::to_string(threads));
  if (seed >= 0) overrides.push_back("seed=" + std::to_string(seed));
  try {
    const fcifem::ExperimentConfig cfg = fcifem::load_config(config_path, overrides);
    const fcifem::RunResult result = fcifem::run_experiment(cfg);
    fcifem::write_run_result(cfg, result);
    std::cout << result.result_json().at("metrics").dump(2) << '\n';
    std::cout << "results written to " << cfg.output_dir << '\n';
  } catch (const fcifem::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

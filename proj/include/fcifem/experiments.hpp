#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fcifem/geometry.hpp"

namespace fcifem {

/// Invalid or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FieldConfig {
  std::string kind = "divertor";
  double b0 = 1.0;
  double b_z = 1.0;
  double b_zeta = 1.0;
};

/// (R, Z) bounds and zeta period. Periodic problems use [z_min, z_max] as the Z period.
struct DomainConfig {
  double r_min = 0.0;
  double r_max = 2.0;
  double z_min = -1.0;
  double z_max = 1.5;
  double zeta_period = 0.0;
  Box2 box() const { return {r_min, r_max, z_min, z_max}; }
};

struct GridConfig {
  int n_r = 20;
  int n_z = 20;
  int n_zeta = 1;
};

struct MappingConfig {
  std::string kind = "taylor_spline";
  int taylor_order = 2;
  double tolerance = 1e-10;
};

struct SolverConfig {
  std::string kind = "direct";
  double tolerance = 1e-10;
  int max_iterations = 20000;
};

/// One curve of the periodic 2D study: N_zeta = N_Z * zeta_ratio[0] / zeta_ratio[1]
/// for every N_Z in n_z.
struct SeriesConfig {
  std::string label;
  int order = 2;
  std::array<int, 2> zeta_ratio{1, 10};
  std::string mapping = "analytic_straight";
  std::vector<int> n_z;
};

struct ExperimentConfig {
  std::string problem;
  FieldConfig field;
  DomainConfig domain;
  GridConfig grid;
  int order = 2;
  MappingConfig mapping;
  int quadrature_refinement = 10;
  SolverConfig solver;
  int threads = 1;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  int sample_oversampling = 3;
  /// Resolution scan: H (tokamak_convergence) or Cartesian N = N_Z = N_zeta (cartesian_compare).
  std::vector<int> scan;

  struct Periodic2d {
    int wave_number = 10;
    std::vector<SeriesConfig> series;
  } periodic2d;

  struct Convergence {
    std::string reference = "analytic";
    int reference_scale = 0;
    int boundary_samples = 4000;
  } convergence;

  struct Cartesian {
    std::string target = "periodic2d";
    int fcifem_n_z = 172;
    std::array<int, 2> zeta_ratio{4, 43};
    int n_zeta_3d = 10;
  } cartesian;

  struct Filament {
    Point3 start{0.36, -1.0, 0.0};
    int samples = 400;
    bool compare_exact = true;
    bool identity_sparsity = true;
    int alignment_zeta_samples = 8;
    int export_zeta_samples = 16;
    bool export_fields = true;
  } filament;

  /// Complete configuration including defaults; rerunning it reproduces the run.
  nlohmann::json to_json() const;
};

/// Defaults for `problem` (one of periodic2d, tokamak_convergence,
/// tokamak_filament, mapping_error, cartesian_compare) as JSON.
nlohmann::json default_config_json(const std::string& problem);

/// Merges `user` over the problem defaults. Unknown keys and ill-typed values
/// raise ConfigError naming the offending key.
ExperimentConfig parse_config(const nlohmann::json& user);
ExperimentConfig load_config(const std::string& path, std::span<const std::string> overrides = {});

/// Applies "a.b.c=value" to a JSON tree. The value is read as JSON when it
/// parses, otherwise as a string. Array elements are addressed by index.
void apply_override(nlohmann::json& tree, const std::string& assignment);

struct RunResult {
  nlohmann::json config;
  nlohmann::json metrics;
  /// Wall-clock seconds per stage, written separately so result.json stays reproducible.
  nlohmann::json timings = nlohmann::json::object();
  /// Files written by the run, relative to the output directory.
  std::vector<std::string> artifacts;

  nlohmann::json result_json() const;
};

RunResult run_periodic2d(const ExperimentConfig& cfg);
RunResult run_cartesian_compare(const ExperimentConfig& cfg);
RunResult run_tokamak_convergence(const ExperimentConfig& cfg);
RunResult run_tokamak_filament(const ExperimentConfig& cfg);
RunResult run_mapping_error(const ExperimentConfig& cfg);

/// Dispatches on cfg.problem.
RunResult run_experiment(const ExperimentConfig& cfg);

/// Writes result.json and timings.json into cfg.output_dir.
void write_run_result(const ExperimentConfig& cfg, const RunResult& result);

/// Least-squares line through (log x, log y).
struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  /// RMS of the residuals in log(y).
  double residual = 0.0;
  int points = 0;
};
LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y);

/// x at which the piecewise-linear log-log curve through (x, y) reaches
/// `target` (x ascending, y decreasing). End segments are extended when
/// `target` lies outside the sampled range; `extrapolated` reports this.
double loglog_crossing(std::span<const double> x, std::span<const double> y, double target, bool* extrapolated);

}  // namespace fcifem

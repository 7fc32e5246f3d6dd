#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "fcifem/experiments.hpp"

using namespace fcifem;
using nlohmann::json;

namespace {

std::string temp_dir(const std::string& name) {
  const std::filesystem::path p = std::filesystem::path(::testing::TempDir()) / ("fcifem_" + name);
  std::filesystem::remove_all(p);
  return p.string();
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json small_periodic(const std::string& out) {
  return {{"problem", "periodic2d"},
          {"quadrature_refinement", 4},
          {"output_dir", out},
          {"periodic2d",
           {{"wave_number", 2},
            {"series", json::array({{{"label", "q"}, {"order", 2}, {"zeta_ratio", {1, 2}}, {"n_z", {8, 16}}}})}}}};
}

}  // namespace

TEST(ExperimentConfig, DefaultsFillMissingKeys) {
  const ExperimentConfig c = parse_config({{"problem", "mapping_error"}});
  EXPECT_EQ(c.grid.n_r, 20);
  EXPECT_EQ(c.grid.n_z, 20);
  EXPECT_EQ(c.mapping.kind, "taylor_spline");
  EXPECT_DOUBLE_EQ(c.domain.zeta_period, M_PI / 20);
  EXPECT_DOUBLE_EQ(c.domain.z_min, -1.0);
  EXPECT_FALSE(c.to_json().contains("filament"));
}

TEST(ExperimentConfig, ProblemDefaultsDiffer) {
  EXPECT_EQ(parse_config({{"problem", "tokamak_filament"}}).grid.n_r, 100);
  const ExperimentConfig p = parse_config({{"problem", "periodic2d"}});
  EXPECT_EQ(p.field.kind, "straight");
  EXPECT_DOUBLE_EQ(p.domain.zeta_period, 2 * M_PI);
  EXPECT_EQ(p.periodic2d.series.size(), 4u);
  EXPECT_EQ(parse_config({{"problem", "tokamak_convergence"}}).scan, (std::vector<int>{1, 2, 3}));
}

TEST(ExperimentConfig, RejectsUnknownAndIllTypedKeys) {
  EXPECT_THROW(parse_config({{"problem", "nonsense"}}), ConfigError);
  EXPECT_THROW(parse_config(json::object()), ConfigError);
  EXPECT_THROW(parse_config({{"problem", "mapping_error"}, {"grid", {{"n_q", 3}}}}), ConfigError);
  EXPECT_THROW(parse_config({{"problem", "mapping_error"}, {"order", 1.5}}), ConfigError);
  EXPECT_THROW(parse_config({{"problem", "mapping_error"}, {"mapping", {{"kind", 3}}}}), ConfigError);
  // Sections belong to their problem only.
  EXPECT_THROW(parse_config({{"problem", "tokamak_convergence"}, {"filament", {{"samples", 10}}}}), ConfigError);
  try {
    parse_config({{"problem", "mapping_error"}, {"solver", {{"kind", "direct"}, {"tol", 1.0}}}});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("solver.tol"), std::string::npos);
  }
}

TEST(ExperimentConfig, ValidatesValues) {
  EXPECT_THROW(parse_config({{"problem", "mapping_error"}, {"order", 3}}), ConfigError);
  EXPECT_THROW(parse_config({{"problem", "mapping_error"}, {"grid", {{"n_r", 0}}}}), ConfigError);
  EXPECT_THROW(parse_config({{"problem", "mapping_error"}, {"domain", {{"r_min", 3.0}}}}), ConfigError);
  EXPECT_THROW(parse_config({{"problem", "mapping_error"}, {"sample_oversampling", 2}}), ConfigError);
  EXPECT_THROW(parse_config({{"problem", "mapping_error"}, {"mapping", {{"kind", "magic"}}}}), ConfigError);
  EXPECT_THROW(parse_config({{"problem", "tokamak_convergence"},
                             {"convergence", {{"reference", "self_converged"}, {"reference_scale", 4}}}}),
               ConfigError);
  // 43 * 1 / 10 is not an integer plane count.
  json bad = small_periodic("x");
  bad["periodic2d"]["series"][0]["zeta_ratio"] = {1, 10};
  bad["periodic2d"]["series"][0]["n_z"] = {43, 86};
  EXPECT_THROW(parse_config(bad), ConfigError);
  EXPECT_THROW(parse_config({{"problem", "periodic2d"}, {"domain", {{"zeta_period", 1.0}}}}), ConfigError);
}

TEST(ExperimentConfig, RoundTripsThroughJson) {
  const ExperimentConfig a = parse_config(small_periodic("somewhere"));
  const ExperimentConfig b = parse_config(a.to_json());
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_EQ(b.periodic2d.series[0].n_z, (std::vector<int>{8, 16}));
  EXPECT_EQ(b.output_dir, "somewhere");
}

TEST(Override, SetsNestedValuesAndArrayElements) {
  json t = default_config_json("periodic2d");
  apply_override(t, "grid.n_z=12");
  apply_override(t, "solver.tolerance=1e-8");
  apply_override(t, "output_dir=plain text");
  apply_override(t, "periodic2d.series.1.order=1");
  apply_override(t, "scan=[1,2]");
  EXPECT_EQ(t["grid"]["n_z"], 12);
  EXPECT_DOUBLE_EQ(t["solver"]["tolerance"].get<double>(), 1e-8);
  EXPECT_EQ(t["output_dir"], "plain text");
  EXPECT_EQ(t["periodic2d"]["series"][1]["order"], 1);
  EXPECT_EQ(t["scan"], json({1, 2}));
  EXPECT_THROW(apply_override(t, "grid.n_z"), ConfigError);
  EXPECT_THROW(apply_override(t, "periodic2d.series.x.order=1"), ConfigError);
  EXPECT_THROW(apply_override(t, "periodic2d.series.9.order=1"), ConfigError);
  EXPECT_THROW(apply_override(t, "grid.n_z.deeper=1"), ConfigError);
}

TEST(Override, LoadConfigAppliesOverridesToDefaults) {
  const std::string dir = temp_dir("load");
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/c.json";
  std::ofstream(path) << R"({"problem": "mapping_error", "grid": {"n_r": 10}})";
  const std::vector<std::string> ov{"grid.n_z=12", "mapping.kind=exact_ode", "threads=3"};
  const ExperimentConfig c = load_config(path, ov);
  EXPECT_EQ(c.grid.n_r, 10);
  EXPECT_EQ(c.grid.n_z, 12);
  EXPECT_EQ(c.mapping.kind, "exact_ode");
  EXPECT_EQ(c.threads, 3);
  const std::vector<std::string> unknown{"grid.n_w=1"};
  EXPECT_THROW(load_config(path, unknown), ConfigError);
  EXPECT_THROW(load_config(dir + "/missing.json"), ConfigError);
}

TEST(Fit, RecoversPowerLaw) {
  const std::vector<double> x{10, 20, 40, 80};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -2.5));
  const LogLogFit f = fit_loglog(x, y);
  EXPECT_NEAR(f.slope, -2.5, 1e-12);
  EXPECT_NEAR(std::exp(f.intercept), 3.0, 1e-10);
  EXPECT_NEAR(f.residual, 0.0, 1e-12);
  EXPECT_EQ(f.points, 4);
  y[1] *= 1.1;
  EXPECT_GT(fit_loglog(x, y).residual, 0.01);
  EXPECT_THROW(fit_loglog(std::vector<double>{1.0}, std::vector<double>{1.0}), std::invalid_argument);
  EXPECT_THROW(fit_loglog(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, -1.0}), std::invalid_argument);
}

TEST(Fit, CrossingOnPowerLaw) {
  const std::vector<double> x{100, 400, 1600};
  std::vector<double> y;
  for (double v : x) y.push_back(std::pow(v, -1.5));
  bool extrapolated = true;
  EXPECT_NEAR(loglog_crossing(x, y, std::pow(900.0, -1.5), &extrapolated), 900.0, 1e-9);
  EXPECT_FALSE(extrapolated);
  EXPECT_NEAR(loglog_crossing(x, y, std::pow(6400.0, -1.5), &extrapolated), 6400.0, 1e-8);
  EXPECT_TRUE(extrapolated);
  EXPECT_NEAR(loglog_crossing(x, y, std::pow(50.0, -1.5), &extrapolated), 50.0, 1e-10);
  EXPECT_TRUE(extrapolated);
}

TEST(Runs, PeriodicRunIsReproducibleFromItsEcho) {
  const std::string out = temp_dir("periodic");
  const ExperimentConfig cfg = parse_config(small_periodic(out));
  const RunResult a = run_periodic2d(cfg);
  write_run_result(cfg, a);
  const json written = json::parse(read_file(std::filesystem::path(out) / "result.json"));
  EXPECT_EQ(written["format"], "fcifem-result");
  EXPECT_EQ(written["problem"], "periodic2d");
  const RunResult b = run_experiment(parse_config(written["config"]));
  EXPECT_EQ(a.result_json().dump(), b.result_json().dump());
  const json& s = written["metrics"]["series"][0];
  EXPECT_EQ(s["points"].size(), 2u);
  EXPECT_LT(s["fit"]["slope"].get<double>(), -2.0);
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(out) / "periodic2d_scan.csv"));
  EXPECT_TRUE(json::parse(read_file(std::filesystem::path(out) / "timings.json"))["seconds"].contains("total"));
}

TEST(Runs, StraightFieldMappingErrorVanishes) {
  const std::string out = temp_dir("straight");
  json j = {{"problem", "mapping_error"},
            {"field", {{"kind", "straight"}, {"b_z", 0.5}, {"b_zeta", 1.0}}},
            {"grid", {{"n_r", 6}, {"n_z", 6}}},
            {"mapping", {{"kind", "analytic_straight"}}},
            {"output_dir", out}};
  const RunResult r = run_experiment(parse_config(j));
  // Exact RK4 and the closed form agree to rounding for a constant field.
  EXPECT_LT(r.metrics["rms"].get<double>(), 1e-13);
  EXPECT_GT(r.metrics["survivors"].get<int>(), 0);
  // Seeds within 0.5 * pi / 20 of the top leave the domain.
  EXPECT_LT(r.metrics["survivors"].get<int>(), 49);
  EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(out) / "mapping_error.csv"));
}

TEST(Runs, SmallTokamakConvergenceHasExactBoundary) {
  const std::string out = temp_dir("tokamak");
  json j = {{"problem", "tokamak_convergence"},
            {"grid", {{"n_r", 4}, {"n_z", 4}, {"n_zeta", 1}}},
            {"quadrature_refinement", 3},
            {"scan", {1, 2, 3}},
            {"convergence", {{"boundary_samples", 200}}},
            {"output_dir", out}};
  const RunResult r = run_experiment(parse_config(j));
  EXPECT_LT(r.metrics["boundary_max_abs"].get<double>(), 1e-10);
  EXPECT_EQ(r.metrics["points"].size(), 3u);
  const double e1 = r.metrics["points"][0]["l2_error"].get<double>();
  const double e3 = r.metrics["points"][2]["l2_error"].get<double>();
  EXPECT_LT(e3, e1);
  EXPECT_TRUE(r.metrics.contains("richardson_order"));
  const std::string csv = read_file(std::filesystem::path(out) / "convergence.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "h,n_r,n_z,n_zeta,dofs,l2_error,relative_l2_error,max_error,boundary_max_abs,mean_row_nnz,bandwidth,"
            "bandwidth_reordered");
}

TEST(Runs, SmallFilamentRunWritesArtifacts) {
  const std::string out = temp_dir("filament");
  json j = {{"problem", "tokamak_filament"},
            {"grid", {{"n_r", 12}, {"n_z", 12}, {"n_zeta", 1}}},
            {"quadrature_refinement", 2},
            {"filament",
             {{"samples", 40}, {"compare_exact", false}, {"identity_sparsity", true}, {"alignment_zeta_samples", 2},
              {"export_zeta_samples", 2}}},
            {"output_dir", out}};
  const RunResult r = run_experiment(parse_config(j));
  EXPECT_GT(r.metrics["displacement"]["rms"].get<double>(), 0.2);
  EXPECT_EQ(r.metrics["alignment"]["samples"].size(), 2u);
  EXPECT_LE(r.metrics["identity_matrix"]["mean_row_nnz"].get<double>(), 125.0);
  for (const std::string& f : r.artifacts) EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(out) / f)) << f;
  const std::string slice = read_file(std::filesystem::path(out) / "phi_slice.csv");
  EXPECT_EQ(slice.rfind("# fcifem field samples\n", 0), 0u);
  EXPECT_NE(slice.find("# shape: 37,37,1\n"), std::string::npos);
}

TEST(Runs, FilamentLeavingDomainIsReported) {
  json j = {{"problem", "tokamak_filament"},
            {"grid", {{"n_r", 6}, {"n_z", 6}, {"n_zeta", 1}}},
            {"filament", {{"start", {0.36, 1.5, 0.0}}, {"compare_exact", false}}},
            {"output_dir", temp_dir("leaving")}};
  EXPECT_THROW(run_experiment(parse_config(j)), std::runtime_error);
}

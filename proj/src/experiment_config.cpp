#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "fcifem/experiments.hpp"

namespace fcifem {

using nlohmann::json;

void to_json(json& j, const Point3& p) { j = json::array({p.r, p.z, p.zeta}); }
void from_json(const json& j, Point3& p) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected [R, Z, zeta]");
  p = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(FieldConfig, kind, b0, b_z, b_zeta)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DomainConfig, r_min, r_max, z_min, z_max, zeta_period)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GridConfig, n_r, n_z, n_zeta)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(MappingConfig, kind, taylor_order, tolerance)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SolverConfig, kind, tolerance, max_iterations)
// Series entries may omit keys; missing ones take the SeriesConfig defaults.
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SeriesConfig, label, order, zeta_ratio, mapping, n_z)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ExperimentConfig::Periodic2d, wave_number, series)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ExperimentConfig::Convergence, reference, reference_scale, boundary_samples)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ExperimentConfig::Cartesian, target, fcifem_n_z, zeta_ratio, n_zeta_3d)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ExperimentConfig::Filament, start, samples, compare_exact, identity_sparsity,
                                   alignment_zeta_samples, export_zeta_samples, export_fields)

namespace {

const std::set<std::string> kProblems{"periodic2d", "tokamak_convergence", "tokamak_filament", "mapping_error",
                                      "cartesian_compare"};

// Problem-specific sections; the others are not part of that problem's schema.
std::set<std::string> sections_for(const std::string& problem) {
  if (problem == "periodic2d") return {"periodic2d"};
  if (problem == "tokamak_convergence") return {"convergence"};
  if (problem == "tokamak_filament") return {"filament"};
  if (problem == "cartesian_compare") return {"periodic2d", "cartesian", "filament"};
  return {};
}

json full_json(const ExperimentConfig& c) {
  json j;
  j["problem"] = c.problem;
  j["field"] = c.field;
  j["domain"] = c.domain;
  j["grid"] = c.grid;
  j["order"] = c.order;
  j["mapping"] = c.mapping;
  j["quadrature_refinement"] = c.quadrature_refinement;
  j["solver"] = c.solver;
  j["threads"] = c.threads;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["sample_oversampling"] = c.sample_oversampling;
  j["scan"] = c.scan;
  const std::set<std::string> sections = sections_for(c.problem);
  if (sections.contains("periodic2d")) j["periodic2d"] = c.periodic2d;
  if (sections.contains("convergence")) j["convergence"] = c.convergence;
  if (sections.contains("cartesian")) j["cartesian"] = c.cartesian;
  if (sections.contains("filament")) j["filament"] = c.filament;
  return j;
}

ExperimentConfig defaults_for(const std::string& problem) {
  if (!kProblems.contains(problem)) throw ConfigError("unknown problem '" + problem + "'");
  ExperimentConfig c;
  c.problem = problem;
  c.domain.zeta_period = std::numbers::pi / 20;
  if (problem == "periodic2d" || problem == "cartesian_compare") {
    c.field = {"straight", 1.0, 1.0, 1.0};
    c.domain = {0.0, 0.0, 0.0, 2 * std::numbers::pi, 2 * std::numbers::pi};
    c.grid = {0, 43, 4};
    c.mapping.kind = "analytic_straight";
    c.solver.kind = "cg";
    c.periodic2d.series = {
        {"quadratic_4_43", 2, {4, 43}, "analytic_straight", {43, 86, 172, 344}},
        {"quadratic_1_10", 2, {1, 10}, "analytic_straight", {40, 80, 160, 320}},
        {"linear_4_43", 1, {4, 43}, "analytic_straight", {43, 86, 172, 344}},
        {"linear_1_10", 1, {1, 10}, "analytic_straight", {40, 80, 160, 320}},
    };
    if (problem == "cartesian_compare") c.scan = {120, 172, 240};
  } else if (problem == "tokamak_convergence") {
    c.scan = {1, 2, 3};
  } else if (problem == "tokamak_filament") {
    c.grid = {100, 100, 1};
  }
  return c;
}

std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Every user key must exist in the defaults with a compatible type.
void validate_against(const json& user, const json& reference, const std::string& path) {
  if (reference.is_object()) {
    if (!user.is_object()) throw ConfigError("'" + path + "' must be an object");
    for (const auto& [key, value] : user.items()) {
      if (!reference.contains(key)) throw ConfigError("unknown key '" + join_path(path, key) + "'");
      validate_against(value, reference.at(key), join_path(path, key));
    }
    return;
  }
  if (reference.is_array()) {
    if (!user.is_array()) throw ConfigError("'" + path + "' must be an array");
    if (!reference.empty()) {
      for (std::size_t n = 0; n < user.size(); ++n) {
        validate_against(user[n], reference[std::min(n, reference.size() - 1)], path + "." + std::to_string(n));
      }
    }
    return;
  }
  if (reference.is_boolean() && !user.is_boolean()) throw ConfigError("'" + path + "' must be a boolean");
  if (reference.is_string() && !user.is_string()) throw ConfigError("'" + path + "' must be a string");
  if (reference.is_number_integer() && !user.is_number_integer()) {
    throw ConfigError("'" + path + "' must be an integer");
  }
  if (reference.is_number_float() && !user.is_number()) throw ConfigError("'" + path + "' must be a number");
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void check_mapping_kind(const std::string& kind, const std::string& key) {
  static const std::set<std::string> kinds{"exact_ode", "taylor_spline", "analytic_straight", "identity"};
  require(kinds.contains(kind), "'" + key + "' must be one of exact_ode, taylor_spline, analytic_straight, identity");
}

void validate(const ExperimentConfig& c) {
  require(c.field.kind == "straight" || c.field.kind == "divertor", "'field.kind' must be straight or divertor");
  require(c.field.b_zeta != 0.0 && c.field.b0 != 0.0, "field: toroidal component must be nonzero");
  const bool periodic = c.problem == "periodic2d" || c.problem == "cartesian_compare";
  if (!periodic) require(c.domain.r_min < c.domain.r_max, "domain: r_min must be below r_max");
  require(c.domain.z_min < c.domain.z_max, "domain: z_min must be below z_max");
  require(c.domain.zeta_period > 0.0, "domain: zeta_period must be positive");
  if (periodic) {
    // The Fourier oracle uses integer wave numbers, so both periods must be 2 pi.
    const auto two_pi = [](double L) { return std::abs(L - 2 * std::numbers::pi) < 1e-9; };
    require(two_pi(c.domain.z_max - c.domain.z_min) && two_pi(c.domain.zeta_period),
            "domain: periodic problems need Z and zeta periods of 2 pi");
  }
  require(c.order == 1 || c.order == 2, "'order' must be 1 or 2");
  check_mapping_kind(c.mapping.kind, "mapping.kind");
  require(c.mapping.taylor_order == 1 || c.mapping.taylor_order == 2, "'mapping.taylor_order' must be 1 or 2");
  require(c.mapping.tolerance > 0.0, "'mapping.tolerance' must be positive");
  require(c.quadrature_refinement >= 1, "'quadrature_refinement' must be >= 1");
  require(c.solver.kind == "direct" || c.solver.kind == "cg", "'solver.kind' must be direct or cg");
  require(c.solver.tolerance > 0.0 && c.solver.max_iterations > 0, "solver: tolerance and max_iterations must be positive");
  require(c.threads >= 1, "'threads' must be >= 1");
  require(c.sample_oversampling >= 3, "'sample_oversampling' must be >= 3");
  require(!c.output_dir.empty(), "'output_dir' must not be empty");
  for (int v : c.scan) require(v > 0, "'scan' entries must be positive");
  if (periodic) {
    require(c.field.kind == "straight", "periodic problems need a straight field");
    require(c.periodic2d.wave_number > 0, "'periodic2d.wave_number' must be positive");
  } else {
    require(c.grid.n_r > 0 && c.grid.n_z > 0 && c.grid.n_zeta > 0, "grid counts must be positive");
  }
  if (c.problem == "periodic2d") {
    require(!c.periodic2d.series.empty(), "'periodic2d.series' must not be empty");
    for (const SeriesConfig& s : c.periodic2d.series) {
      require(!s.label.empty(), "every periodic2d series needs a label");
      require(s.order == 1 || s.order == 2, "series '" + s.label + "': order must be 1 or 2");
      require(s.zeta_ratio[0] > 0 && s.zeta_ratio[1] > 0, "series '" + s.label + "': zeta_ratio must be positive");
      check_mapping_kind(s.mapping, "series mapping");
      require(s.mapping != "exact_ode" && s.mapping != "taylor_spline",
              "series '" + s.label + "': periodic problems use analytic_straight or identity");
      require(s.n_z.size() >= 2, "series '" + s.label + "': at least two resolutions are needed");
      for (int n : s.n_z) {
        require(n > 0 && (n * s.zeta_ratio[0]) % s.zeta_ratio[1] == 0,
                "series '" + s.label + "': N_Z = " + std::to_string(n) + " does not give an integer N_zeta");
      }
    }
  }
  if (c.problem == "tokamak_convergence") {
    require(c.scan.size() >= 2, "'scan' needs at least two scale factors");
    require(c.convergence.reference == "analytic" || c.convergence.reference == "self_converged",
            "'convergence.reference' must be analytic or self_converged");
    if (c.convergence.reference == "self_converged") {
      int largest = 0;
      for (int h : c.scan) largest = std::max(largest, h);
      require(c.convergence.reference_scale >= 2 * largest,
              "'convergence.reference_scale' must be at least twice the largest scanned H");
    }
    require(c.convergence.boundary_samples > 0, "'convergence.boundary_samples' must be positive");
  }
  if (c.problem == "cartesian_compare") {
    require(c.cartesian.target == "periodic2d" || c.cartesian.target == "tokamak_filament",
            "'cartesian.target' must be periodic2d or tokamak_filament");
    if (c.cartesian.target == "periodic2d") {
      require(c.scan.size() >= 2, "'scan' needs at least two Cartesian resolutions");
      require(c.cartesian.zeta_ratio[0] > 0 && c.cartesian.zeta_ratio[1] > 0 &&
                  (c.cartesian.fcifem_n_z * c.cartesian.zeta_ratio[0]) % c.cartesian.zeta_ratio[1] == 0,
              "cartesian: fcifem_n_z and zeta_ratio must give an integer N_zeta");
      require(!c.periodic2d.series.empty(), "cartesian: periodic2d.series supplies the spline order");
    } else {
      require(c.cartesian.n_zeta_3d > 0, "'cartesian.n_zeta_3d' must be positive");
    }
  }
  if (c.problem == "tokamak_filament" || (c.problem == "cartesian_compare" && c.cartesian.target == "tokamak_filament")) {
    require(c.filament.samples >= 4, "'filament.samples' must be >= 4");
    require(c.filament.alignment_zeta_samples >= 1 && c.filament.export_zeta_samples >= 1,
            "filament: sample counts must be positive");
  }
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

}  // namespace

json ExperimentConfig::to_json() const { return full_json(*this); }

json default_config_json(const std::string& problem) { return full_json(defaults_for(problem)); }

ExperimentConfig parse_config(const json& user) {
  if (!user.is_object()) throw ConfigError("configuration must be a JSON object");
  if (!user.contains("problem") || !user["problem"].is_string()) throw ConfigError("missing string key 'problem'");
  const json defaults = default_config_json(user["problem"].get<std::string>());
  validate_against(user, defaults, "");
  json merged = defaults;
  merged.merge_patch(user);
  ExperimentConfig c;
  try {
    c.problem = merged.at("problem").get<std::string>();
    c.field = merged.at("field").get<FieldConfig>();
    c.domain = merged.at("domain").get<DomainConfig>();
    c.grid = merged.at("grid").get<GridConfig>();
    c.order = merged.at("order").get<int>();
    c.mapping = merged.at("mapping").get<MappingConfig>();
    c.quadrature_refinement = merged.at("quadrature_refinement").get<int>();
    c.solver = merged.at("solver").get<SolverConfig>();
    c.threads = merged.at("threads").get<int>();
    c.seed = merged.at("seed").get<std::uint64_t>();
    c.output_dir = merged.at("output_dir").get<std::string>();
    c.sample_oversampling = merged.at("sample_oversampling").get<int>();
    c.scan = merged.at("scan").get<std::vector<int>>();
    if (merged.contains("periodic2d")) c.periodic2d = merged["periodic2d"].get<ExperimentConfig::Periodic2d>();
    if (merged.contains("convergence")) c.convergence = merged["convergence"].get<ExperimentConfig::Convergence>();
    if (merged.contains("cartesian")) c.cartesian = merged["cartesian"].get<ExperimentConfig::Cartesian>();
    if (merged.contains("filament")) c.filament = merged["filament"].get<ExperimentConfig::Filament>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("configuration: ") + e.what());
  }
  validate(c);
  return c;
}

void apply_override(json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    parts.push_back(part);
  }
  json* node = &tree;
  for (std::size_t n = 0; n < parts.size(); ++n) {
    const std::string& part = parts[n];
    const bool last = n + 1 == parts.size();
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        std::size_t used = 0;
        idx = std::stoul(part, &used);
        if (used != part.size()) throw std::invalid_argument(part);
      } catch (const std::exception&) {
        throw ConfigError("override key '" + key + "': '" + part + "' is not an array index");
      }
      if (idx >= node->size()) throw ConfigError("override key '" + key + "': index out of range");
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a scalar");
      if (!last && !node->contains(part)) (*node)[part] = json::object();
      node = &(*node)[part];
    }
  }
  *node = parse_value(assignment.substr(eq + 1));
}

ExperimentConfig load_config(const std::string& path, std::span<const std::string> overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file " + path);
  json tree;
  try {
    tree = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!overrides.empty()) {
    // Overrides address the complete tree, so defaults the file omits can be set too.
    parse_config(tree);
    json merged = default_config_json(tree["problem"].get<std::string>());
    merged.merge_patch(tree);
    for (const std::string& o : overrides) apply_override(merged, o);
    tree = std::move(merged);
  }
  return parse_config(tree);
}

}  // namespace fcifem

#pragma once

#include "mfk/field.hpp"
#include "mfk/grid.hpp"
#include "mfk/mild_solver.hpp"
#include "mfk/particle_solver.hpp"
#include "mfk/problem.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mfk {

enum class Experiment { solve_mild, simulate_frozen, simulate_mckean, validate, sweep };

Experiment parse_experiment(const std::string& name);
std::string experiment_name(Experiment e);

struct RunConfig {
  std::optional<Experiment> experiment;
  std::string preset = "heat";
  PresetParameters params;
  GridSpec grid{SpatialGrid{1, 8.0, 512}, 1.0, 64, 0.0};
  SolverOptions solver;
  int particles = 100000;
  double particle_dt = 1.0 / 256.0;
  double bandwidth = 0.0;  // 0 selects Silverman
  std::uint64_t seed = 1;
  int seeds = 1;
  KdeMethod kde = KdeMethod::binned;
  WeightRule weight_rule = WeightRule::left_point;
  std::vector<int> sweep_counts{1000, 10000, 100000};
  double tol_l1 = 1e-3;          // field comparisons (per-time L1)
  double tol_residual = 5e-3;    // weak-form residuals
  double tol_mass = 1e-3;
  double tol_z = 3.0;
  double tol_pass_fraction = 0.95;
  double tol_mckean_l1 = 0.1;
  std::filesystem::path output = "out";

  /// Throws ConfigError naming the violated rule.
  void validate() const;
};

/// Flat `key = value` text; '#' starts a comment. Errors name the source,
/// line and key.
RunConfig parse_config(const std::string& text, const std::string& source = "config");
RunConfig load_config(const std::filesystem::path& path);

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct ComparisonReport {
  std::vector<double> times;
  std::vector<double> l1;
  std::vector<double> linf;
  std::vector<double> z_scores;
  std::vector<Check> checks;

  double max_l1() const;
  double max_linf() const;
  bool pass() const;
  std::string to_text() const;
};

/// Per-level L1 (trapezoid) and Linf distances; throws on grid mismatch.
ComparisonReport compare_fields(const Field& a, const Field& b);

struct RunOutcome {
  int exit_status = 1;
  std::vector<Check> checks;
  std::vector<std::filesystem::path> files;
  std::string summary() const;
};

/// Executes the configured experiment and writes its artifacts into
/// config.output. exit_status is 0 iff every check passes.
RunOutcome run(const RunConfig& config);

/// Grid thread count: the flag wins, then MFK_THREADS, else the runtime default.
void configure_threads(std::optional<int> flag);

}  // namespace mfk

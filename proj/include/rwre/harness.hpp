#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/kernels.hpp"
#include "rwre/lattice.hpp"

namespace rwre {

/// Schema or semantic violation in a manifest; the message names the key.
struct ManifestError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A recipe asked for more work than its resource caps allow.
struct ResourceCapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One experiment. Every key is flat; absent keys take the recipe default.
struct ExperimentManifest {
  std::string recipe;
  std::string artifact_version = "1.0.0";
  int dimension = 2;
  std::vector<double> p0;  ///< empty: symmetric walk
  std::vector<double> epsilon_list;
  double target_epsilon = 0.08;
  std::string law_file;  ///< empty: the built-in two-atom law (d = 2)
  std::vector<double> delta_list;
  std::vector<Site> box_sites;
  std::int64_t n_steps = 0;
  std::int64_t burn_in = -1;  ///< -1: default burn-in for each epsilon
  int replicas = 0;
  std::int64_t n_traj = 0;
  int n_env = 0;
  int n_instances = 0;
  int radius = 4;
  std::vector<std::string> methods;
  int truncated_steps = 10000;
  int quad_coarse = 0;
  int quad_fine = 0;
  double tol = 1e-8;
  double identity_delta = 0.9;
  int identity_n_env = 0;
  std::int64_t identity_n_traj = 0;
  int identity_config = 0;
  std::vector<Site> kalikow_A;
  std::vector<Site> kalikow_y;
  std::vector<Site> kalikow_z;
  std::vector<double> direction;
  int L = 20;
  double M = 2.0;
  std::int64_t step_cap = 10'000'000;
  int max_sites = 3;
  int site_radius = 2;
  double max_perturbation = 0.02;
  int window_radius = 56;
  double max_walk_steps = 5e9;  ///< cap on simulated steps per recipe
  std::vector<std::uint64_t> seeds{20260101};
  std::string out_dir;
  /// Directory that relative law_file paths are resolved against.
  std::string base_dir;

  std::uint64_t master_seed() const { return seeds.front(); }
  TransitionKernel kernel() const;
  PerturbationLaw law() const;
  /// Flat JSON with every key in a fixed order. The copy written next to the
  /// outputs leaves out out_dir so runs into different directories compare equal.
  std::string to_json(bool with_out_dir = true) const;
};

const std::vector<std::string>& recipe_names();

/// Recipe defaults: the acceptance-suite settings.
ExperimentManifest default_manifest(const std::string& recipe);

/// Keys of text override the recipe defaults; throws ManifestError.
ExperimentManifest parse_manifest(const std::string& text, const std::string& base_dir = "");
ExperimentManifest load_manifest(const std::string& path);
/// Applies key=value, with value parsed as JSON (bare words as strings).
void apply_override(ExperimentManifest& m, const std::string& assignment);
void validate(const ExperimentManifest& m);

struct CriterionResult {
  int id = 0;
  bool pass = false;
  std::string note;
  std::vector<std::pair<std::string, double>> metrics;
};

struct RecipeResult {
  std::string recipe;
  std::vector<CriterionResult> criteria;
  std::vector<std::string> files;  ///< written, relative to out_dir
  bool passed() const;
  /// Criteria keyed by acceptance id; no timings or host details.
  std::string summary_json() const;
};

/// Runs the recipe and writes its CSV/JSON outputs and summary.json into
/// m.out_dir.
RecipeResult run_recipe(const ExperimentManifest& m);

/// Power-law fit of |measured - predicted| against epsilon.
struct ScalingPoint {
  double epsilon = 0.0;
  double residual = 0.0;  ///< |measured - predicted|
  double se = 0.0;
  bool resolved = false;  ///< residual above noise_sigmas standard errors
};
struct ScalingReport {
  std::vector<ScalingPoint> points;
  bool noise_limited = true;
  double slope = 0.0;
  double slope_se = 0.0;
  double intercept = 0.0;  ///< log-residual at epsilon = 1
  std::string status() const { return noise_limited ? "noise-limited" : "fitted"; }
  /// epsilon, residual, stderr, lower, upper, resolved, fit
  void write_csv(std::ostream& out) const;
};
/// Needs >= 3 epsilons spanning >= 4x. Points within noise_sigmas standard
/// errors of zero are excluded; with fewer than two resolved points spanning
/// 2x the slope is not fitted.
ScalingReport residual_scaling_report(const std::vector<double>& epsilon, const std::vector<double>& measured,
                                      const std::vector<double>& predicted, const std::vector<double>& se,
                                      double noise_sigmas = 2.0);

}  // namespace rwre

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bpre/asymptotics.hpp"
#include "bpre/env_models.hpp"
#include "bpre/montecarlo.hpp"

namespace bpre {

inline constexpr const char* kVersion = "0.1.0";

struct ModelSection {
  std::string family = "pareto_geometric";
  double beta = 3.0;
  double x_m = 1.0;
  double shift_c = 2.0;
  double gamma_min = 0.0;
  double gamma_max = 0.5;

  EnvironmentModel build() const;
};

struct RunSection {
  std::vector<int> n{60};
  std::int64_t samples = 100000;
  std::int64_t min_survivors = 2000;
  /// Forced jump positions; 0 means n.
  int j_max = 0;
  Eigen::VectorXd grid = default_flt_grid();
  std::uint64_t seed = 1;
  int workers = 1;

  std::string h_n = "log";
  std::string delta_n = "3/log";
  double split_level = 0.3;
  /// Truncation of the D and K1 series.
  int k_max = 200;
  /// Truncation of the K series.
  int series_j_max = 60;
  std::int64_t walk_samples = 1000000;
  std::int64_t env_samples = 100000;
  /// Level x of the gamma-mean estimators.
  double gamma_x = 25.0;
  double epsilon = 0.2;
  bool full_paths = false;
  /// naive | bigjump | explosion, for unlaw and flt.
  std::string harvest = "";

  BigJumpConfig big_jump() const;
  RunSettings settings() const { return {seed, workers}; }
};

struct OutputSection {
  std::string directory = "out";
  std::string format = "json";
};

/// Flat INI experiment description: [model], [run], [output].
struct ExperimentConfig {
  ModelSection model;
  RunSection run;
  OutputSection output;

  /// Validates every field; throws ConfigError.
  void validate() const;
  /// key -> value text for every setting, as echoed into reports.
  std::map<std::string, std::string> echo() const;
};

/// Parses INI text; unknown sections or keys are rejected.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

HarvestMode harvest_mode_from_string(const std::string& name);
std::string to_string(HarvestMode mode);

}  // namespace bpre

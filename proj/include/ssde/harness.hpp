#pragma once

#include "ssde/model.hpp"
#include "ssde/stats.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ssde {

enum class Estimator { approx, mc, null };

std::string to_string(Estimator e);
Estimator parse_estimator(const std::string& name);

struct ExperimentConfig {
  std::string preset;
  ParamVector theta0;
  std::vector<double> T_list;
  std::vector<int> n_list{1};
  int m = 1000;
  int n_replications = 100;
  int n_latent = 256;
  Estimator estimator = Estimator::approx;
  std::uint64_t seed = 0;
  std::string output_dir;
  // Posterior runs: flat prior on theta0 +/- prior_half_width, and the sets
  // A_r = {|theta - theta0| >= r} for r in decay_radii.
  double prior_half_width = 3.0;
  std::vector<double> decay_radii{1.0};
};

// Strict parse: unknown keys and wrong types are config errors. Only preset
// and T_list are required; theta0 defaults to the preset's value.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& file);
nlohmann::json to_json(const ExperimentConfig& config);

struct RunOptions {
  int threads = 0;
  // Write report.json and cell CSVs under config.output_dir when non-empty.
  bool write_files = true;
};

// Each returns the report; runtime_seconds is the only field that depends on
// anything other than the config and the library version.
nlohmann::json run_consistency(const ExperimentConfig& config, const RunOptions& opts = {});
nlohmann::json run_normality(const ExperimentConfig& config, const RunOptions& opts = {});
nlohmann::json run_posterior(const ExperimentConfig& config, const RunOptions& opts = {});

// Seed of replication `rep` in cell `cell`.
std::uint64_t replication_seed(std::uint64_t master, std::size_t cell, std::size_t rep);

}  // namespace ssde

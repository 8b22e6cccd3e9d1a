#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vf/env/world.hpp"
#include "vf/nn/model.hpp"
#include "vf/ppo/config.hpp"

namespace vf {

struct EvalSettings {
  std::string battery = "standard";
  int episodes = 100;
  std::uint64_t seed = 1000;
};

struct AlignSettings {
  std::string site = "post-GLU";
  int stimuli = 500;
  int sites = 200;
  double sigma = 0.1;
  int folds = 5;
  std::uint64_t dataset_seed = 2024;
  std::uint64_t cortex_seed = 7;
  std::vector<double> grid;  // empty = eight log-spaced values 1e-6 .. 1e3
};

// Fully merged run configuration. File keys:
//   inherits       path of a base file (relative to this one); objects merge
//                  recursively, this file wins
//   profile        track1_phase1 | track1_phase2 | track2
//   seed, output_dir, precision ("single"), deterministic, jobs, resume_from
//   environment    see world_config_from_json
//   model          {"encoder": "simple_cnn" | "deep_resnet", "use_norm", "use_glu"}
//   training       keys named after the hyperparameter table rows
//   evaluation     {"battery", "episodes", "seed"}
//   alignment      {"site", "stimuli", "sites", "sigma", "folds", "dataset_seed",
//                   "cortex_seed", "grid"}
// Profile defaults are applied first, so a file only lists what it changes.
struct RunConfig {
  TrainingProfile profile = TrainingProfile::Track1Phase1;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::string precision = "single";
  bool deterministic = true;
  int jobs = 1;
  std::string resume_from;
  WorldConfig world;
  ModelSpec model;
  TrainingConfig training;
  EvalSettings eval;
  AlignSettings align;

  // Errors: Config naming the offending field.
  void validate() const;

  static RunConfig defaults(TrainingProfile profile);
};

// Reads `path` and its inherits chain into one tree. Errors: Config with the
// parser's line/column for malformed JSON, or for an inheritance cycle.
nlohmann::json load_config_tree(const std::filesystem::path& path);

// Errors: Config naming the offending key (unknown keys are rejected).
RunConfig run_config_from_json(const nlohmann::json& tree, std::optional<TrainingProfile> profile_override = {});
nlohmann::json to_json(const RunConfig& c);

// VF_SEED and VF_OUT_DIR, when set, replace seed and output_dir.
void apply_env_overrides(RunConfig& c);

ModelSpec parse_model_json(const nlohmann::json& j, ModelSpec base);

}  // namespace vf

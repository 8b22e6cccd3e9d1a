#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "vf/eval/behavior.hpp"
#include "vf/eval/dataset.hpp"

namespace vf {

struct AlignmentReport {
  std::string arch_id;
  std::string site;
  int rows = 0;
  int feature_dim = 0;
  int neurons = 0;
  double r2 = 0;             // test split, uniform mean over neurons
  int excluded_neurons = 0;  // constant on the test split
  double strength = 0;
  double rdm_correlation = 0;  // over every stimulus
  int rdm_excluded_pairs = 0;
};

// Features at `site` -> cross-validated ridge on the dataset's split, plus RDM
// comparison against the responses.
AlignmentReport align(const Model<float>& model, const AlignmentDataset& dataset, FeatureSite site,
                      const std::vector<double>& grid = default_ridge_grid(), int folds = 5);
nlohmann::json to_json(const AlignmentReport& r);

struct SweepRow {
  std::filesystem::path checkpoint;
  std::uint64_t step = 0;
  double r2 = 0, rdm = 0, asr = 0, msr = 0, final_score = 0, gap = 0;
  bool best_r2 = false;
};

struct SweepReport {
  std::vector<SweepRow> rows;  // sorted by step, input order among equal steps
  int duplicate_steps = 0;
};

// Errors: Config for fewer than 2 checkpoints.
SweepReport checkpoint_sweep(const std::vector<std::filesystem::path>& checkpoints, const AlignmentDataset& dataset,
                             FeatureSite site, const WorldConfig& world, const std::vector<PerturbationSpec>& battery,
                             int episodes, std::uint64_t seed);
std::string sweep_csv(const SweepReport& report);

}  // namespace vf

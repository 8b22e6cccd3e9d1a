#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vf/env/perturb.hpp"
#include "vf/env/world.hpp"
#include "vf/nn/model.hpp"

namespace vf {

// What a policy sees for one running episode. `state` is privileged
// information that only the scripted oracle reads.
struct EpisodeView {
  const Observation* observation = nullptr;
  const WorldState* state = nullptr;
  std::uint64_t episode_seed = 0;
  int t = 0;
};

class EvalPolicy {
 public:
  virtual ~EvalPolicy() = default;
  virtual std::string name() const = 0;
  // One action per view. Must not depend on batch composition.
  virtual void act(std::span<const EpisodeView> batch, std::span<Action> out) = 0;
};

// Deterministic mean action of a trained model with its normaliser frozen.
class ModelPolicy final : public EvalPolicy {
 public:
  explicit ModelPolicy(const Model<float>& model) : model_(model) {}
  std::string name() const override { return model_.spec().arch_id(); }
  void act(std::span<const EpisodeView> batch, std::span<Action> out) override;

 private:
  const Model<float>& model_;
};

// Turns toward the target using the true world state, then walks in.
class ScriptedOracle final : public EvalPolicy {
 public:
  std::string name() const override { return "oracle"; }
  void act(std::span<const EpisodeView> batch, std::span<Action> out) override;
};

// Uniform actions in [-1, 1]^3 from a stream keyed on (episode seed, t).
class RandomPolicy final : public EvalPolicy {
 public:
  std::string name() const override { return "random"; }
  void act(std::span<const EpisodeView> batch, std::span<Action> out) override;
};

struct ConditionResult {
  PerturbationSpec spec;
  int episodes = 0;
  int successes = 0;
  double success_rate = 0;
  double mean_length = 0;
  double mean_return = 0;
};

// Episode j starts from derive_seed(seed, Eval, j) regardless of batching, so
// every condition replays the same layouts. Observations pass through
// apply_perturbation with frame = derive_seed(episode_seed, Noise, t).
// Errors: Config when episodes <= 0.
ConditionResult evaluate_success(EvalPolicy& policy, const WorldConfig& world, const PerturbationSpec& perturbation,
                                 int episodes, std::uint64_t seed, int batch = 32);

struct EvalResult {
  double asr = 0;
  double msr = 0;
  double final_score = 0;
  // conditions[0] is clean; the rest follow the battery order.
  std::vector<ConditionResult> conditions;
  int episodes = 0;
  std::uint64_t seed = 0;

  double gap() const { return asr - msr; }
};

// (ASR + MSR) / 2. Errors: Data when either rate lies outside [0, 1].
double final_score(double asr, double msr);

// Clean condition plus every non-trivial entry of `battery`. MSR is the mean
// over the battery entries; an empty battery gives MSR = ASR.
EvalResult evaluate_battery(EvalPolicy& policy, const WorldConfig& world, const std::vector<PerturbationSpec>& battery,
                            int episodes, std::uint64_t seed);

// Mean success over `subset` conditions taken from an existing result, by name.
double subset_success(const EvalResult& result, const std::vector<PerturbationSpec>& subset);

nlohmann::json to_json(const EvalResult& r);
std::string eval_csv(const EvalResult& r);

struct AblationVariant {
  std::string name;  // e.g. "full", "no-norm", "no-glu", "neither"
  std::filesystem::path checkpoint;
};

struct AblationRow {
  std::string variant;
  std::string arch_id;
  double asr = 0, msr = 0, final_score = 0, gap = 0;
};

// Evaluates each variant's checkpoint on the clean condition and the battery.
// Errors: Io naming the variant for a missing checkpoint.
std::vector<AblationRow> run_ablation_protocol(const std::vector<AblationVariant>& variants, const WorldConfig& world,
                                               const std::vector<PerturbationSpec>& battery, int episodes,
                                               std::uint64_t seed);
std::string ablation_csv(const std::vector<AblationRow>& rows);

// Probe seed for checkpoint selection; its episodes are disjoint from those of
// evaluate_*(..., eval_seed).
inline std::uint64_t selection_seed(std::uint64_t eval_seed) { return derive_seed(eval_seed, kSeedEval, 1ull << 32); }

// Highest clean success rate over `episodes` probe episodes; ties go to the
// later step. Errors: Config for an empty list.
std::filesystem::path select_best_checkpoint(const std::vector<std::filesystem::path>& checkpoints,
                                             const WorldConfig& world, int episodes, std::uint64_t seed);

}  // namespace vf

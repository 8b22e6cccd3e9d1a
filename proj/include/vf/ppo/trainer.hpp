#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "vf/core/rng.hpp"
#include "vf/env/world.hpp"
#include "vf/nn/model.hpp"
#include "vf/ppo/buffer.hpp"
#include "vf/ppo/config.hpp"
#include "vf/ppo/optimizer.hpp"

namespace vf {

struct EpisodeRecord {
  int env = 0;
  double episode_return = 0;
  int length = 0;
  bool success = false;
};

// Drives `num_envs` environments with the stochastic policy. Environment i
// draws its k-th episode from derive_seed(derive_seed(seed, Env, i), Env, k)
// and samples actions from its own Policy stream, so results do not depend
// on thread count.
class RolloutCollector {
 public:
  // Called once per environment transition, in env order within a time
  // slice, with the global step after the increment.
  using TransitionHook = std::function<void(std::int64_t step, const std::optional<EpisodeRecord>& finished)>;

  RolloutCollector(WorldConfig world, int num_envs, std::uint64_t seed);

  int num_envs() const { return static_cast<int>(envs_.size()); }
  const WorldConfig& world() const { return world_; }

  // Fills `buffer` (cleared first) and records the bootstrap values. Stops
  // early, leaving the buffer partly filled, once global_step reaches
  // step_limit. Updates the model's normaliser with every new observation.
  // Environment errors are rethrown prefixed with the env index.
  void collect(Model<float>& model, RolloutBuffer& buffer, std::int64_t& global_step, std::int64_t step_limit,
               const TransitionHook& hook = {});

 private:
  struct Slot {
    WorldState state;
    Observation obs;
    Rng policy_rng;
    std::uint64_t env_seed = 0;
    std::uint64_t episodes = 0;
    double episode_return = 0;
  };

  void begin_episode(Slot& s);

  WorldConfig world_;
  std::vector<Slot> envs_;
};

struct UpdateStats {
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double clip_fraction = 0;
  double grad_norm = 0;
  int minibatches = 0;
};

struct MinibatchLoss {
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double total = 0;
  double clip_fraction = 0;
  double mean_ratio = 0;
};

// Clipped-surrogate loss on the given buffer slots:
//   total = policy + value_loss_coef * value - entropy_coef * entropy
// When `with_grads`, model gradients are zeroed and then filled with
// d(total)/d(parameters). Errors: Numeric with minibatch statistics when the
// loss is not finite.
MinibatchLoss ppo_minibatch_loss(Model<float>& model, const RolloutBuffer& buffer, std::span<const std::size_t> slots,
                                 const TrainingConfig& config, bool with_grads);

// num_epochs passes over shuffled minibatches of batch_size with gradient
// clipping and one Adam step per minibatch. Advantages are normalised first
// when the config asks for it.
UpdateStats ppo_update(Model<float>& model, Adam& optimizer, RolloutBuffer& buffer, const TrainingConfig& config,
                       double lr, Rng& shuffle_rng);

struct MetricsRow {
  std::int64_t step = 0;
  std::int64_t episodes = 0;
  double mean_return = 0;   // over the most recent (up to 100) finished episodes
  double success_rate = 0;  // same window
  UpdateStats update;       // latest update, zeros before the first
  double lr = 0;
};

inline constexpr const char* kMetricsHeader =
    "step,episodes,mean_return,success_rate,policy_loss,value_loss,entropy,clip_fraction,lr";
std::string format_metrics_row(const MetricsRow& row);

struct TrainOptions {
  TrainingProfile profile = TrainingProfile::Track1Phase1;
  TrainingConfig config;
  WorldConfig world;
  // Architecture for fresh runs. Phase 2 derives it from the resume checkpoint.
  ModelSpec spec;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> resume_from;
  // Receives checkpoints/step_XXXXXXXXXX.ckpt, checkpoints/final.ckpt and
  // metrics.csv. Empty keeps everything in memory.
  std::filesystem::path out_dir;
  std::function<void(const MetricsRow&)> progress;
};

struct TrainResult {
  Model<float> model;
  std::int64_t start_step = 0;
  std::int64_t final_step = 0;
  std::vector<std::filesystem::path> checkpoints;
  std::vector<MetricsRow> metrics;
};

// collect -> GAE -> update until total_steps further transitions have been
// gathered. Checkpoints land on exact multiples of checkpoint_interval of the
// global step; a final checkpoint is always written. Phase 2 requires a
// GLU-less SimpleCNN checkpoint (Architecture error otherwise), copies its
// parameters and grafts a fresh GLU; the step count continues from it.
TrainResult train(const TrainOptions& options);

std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, std::int64_t step);

}  // namespace vf

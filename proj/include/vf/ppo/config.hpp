#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace vf {

enum class TrainingProfile { Track1Phase1, Track1Phase2, Track2 };

TrainingProfile parse_profile(const std::string& name);
const char* to_string(TrainingProfile profile);

struct TrainingConfig {
  double learning_rate = 9e-5;
  double learning_rate_min = 9e-5;  // informational range bound (Track 2 reports a range)
  double learning_rate_max = 9e-5;
  std::string lr_schedule = "linear";  // linear decay to zero
  int batch_size = 128;
  int buffer_size = 4096;
  int num_epochs = 3;
  double entropy_coef = 0.005;
  double clip_epsilon = 0.2;
  double gae_lambda = 0.95;
  double discount = 0.99;
  int time_horizon = 64;
  int num_envs = 16;
  std::int64_t total_steps = 1'400'000;
  std::int64_t checkpoint_interval = 20'000;
  std::int64_t summary_frequency = 1'000;
  double value_loss_coef = 0.5;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;

  // Throws ErrorKind::Config naming the offending key.
  void validate() const;

  static TrainingConfig track1_phase1();
  static TrainingConfig track1_phase2();
  static TrainingConfig track2();
  static TrainingConfig for_profile(TrainingProfile profile);
};

// Keys follow the hyperparameter table rows verbatim ("Learning Rate",
// "Batch Size", "Buffer Size", ...). Missing keys keep `base` values; unknown
// keys are rejected.
TrainingConfig training_config_from_json(const nlohmann::json& j, TrainingConfig base);
nlohmann::json to_json(const TrainingConfig& c);

// lr0 * (1 - step / total), and 0 once step >= total.
double lr_at(std::int64_t step, const TrainingConfig& config);

}  // namespace vf

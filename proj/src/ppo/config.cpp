#include "vf/ppo/config.hpp"

#include <set>

#include "vf/core/error.hpp"

namespace vf {

TrainingProfile parse_profile(const std::string& name) {
  if (name == "track1_phase1") return TrainingProfile::Track1Phase1;
  if (name == "track1_phase2") return TrainingProfile::Track1Phase2;
  if (name == "track2") return TrainingProfile::Track2;
  fail(ErrorKind::Config, "unknown profile '" + name + "'; known: track1_phase1, track1_phase2, track2");
}

const char* to_string(TrainingProfile p) {
  switch (p) {
    case TrainingProfile::Track1Phase1: return "track1_phase1";
    case TrainingProfile::Track1Phase2: return "track1_phase2";
    case TrainingProfile::Track2: return "track2";
  }
  return "?";
}

void TrainingConfig::validate() const {
  auto bad = [](const std::string& key, const std::string& why) {
    fail(ErrorKind::Config, "training.\"" + key + "\": " + why);
  };
  if (!(learning_rate >= 0)) bad("Learning Rate", "must be non-negative");
  if (lr_schedule != "linear" && lr_schedule != "constant") bad("LR Schedule", "must be 'linear' or 'constant'");
  if (batch_size <= 0) bad("Batch Size", "must be positive");
  if (buffer_size <= 0) bad("Buffer Size", "must be positive");
  if (buffer_size % batch_size != 0) bad("Buffer Size", "must be divisible by Batch Size");
  if (num_envs <= 0) bad("Num Parallel Envs", "must be positive");
  if (buffer_size % num_envs != 0) bad("Buffer Size", "must be divisible by Num Parallel Envs");
  if (num_epochs <= 0) bad("Num Epochs", "must be positive");
  if (!(entropy_coef >= 0)) bad("Entropy Coefficient", "must be non-negative");
  if (!(clip_epsilon > 0)) bad("Clip Parameter", "must be positive");
  if (!(gae_lambda >= 0 && gae_lambda <= 1)) bad("GAE Lambda", "must lie in [0, 1]");
  if (!(discount > 0 && discount <= 1)) bad("Discount Factor", "must lie in (0, 1]");
  if (time_horizon <= 0) bad("Time Horizon", "must be positive");
  if (total_steps <= 0) bad("Total Training Steps", "must be positive");
  if (checkpoint_interval <= 0) bad("Checkpoint Interval", "must be positive");
  if (summary_frequency <= 0) bad("Summary Frequency", "must be positive");
  if (!(value_loss_coef >= 0)) bad("Value Loss Coefficient", "must be non-negative");
  if (!(max_grad_norm > 0)) bad("Max Grad Norm", "must be positive");
}

TrainingConfig TrainingConfig::track1_phase1() {
  TrainingConfig c;
  c.total_steps = 1'400'000;
  return c;
}

TrainingConfig TrainingConfig::track1_phase2() {
  TrainingConfig c;
  c.total_steps = 350'000;
  return c;
}

TrainingConfig TrainingConfig::track2() {
  TrainingConfig c;
  c.learning_rate = 9e-6;
  c.learning_rate_min = 5e-6;
  c.learning_rate_max = 9e-6;
  c.buffer_size = 1024;
  c.total_steps = 1'140'000;
  return c;
}

TrainingConfig TrainingConfig::for_profile(TrainingProfile p) {
  switch (p) {
    case TrainingProfile::Track1Phase1: return track1_phase1();
    case TrainingProfile::Track1Phase2: return track1_phase2();
    case TrainingProfile::Track2: return track2();
  }
  return {};
}

TrainingConfig training_config_from_json(const nlohmann::json& j, TrainingConfig c) {
  if (!j.is_object()) fail(ErrorKind::Config, "training: expected an object");
  static const std::set<std::string> known = {
      "Learning Rate",       "Learning Rate Range",  "LR Schedule",         "Batch Size",
      "Buffer Size",         "Num Epochs",           "Entropy Coefficient", "Clip Parameter",
      "GAE Lambda",          "Discount Factor",      "Time Horizon",        "Num Parallel Envs",
      "Total Training Steps", "Checkpoint Interval", "Summary Frequency",   "Value Loss Coefficient",
      "Max Grad Norm",       "Normalize Advantages"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) fail(ErrorKind::Config, "training.\"" + key + "\": unknown key");
  }
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Config, std::string("training.\"") + key + "\": " + e.what());
    }
  };
  get("Learning Rate", c.learning_rate);
  if (j.contains("Learning Rate Range")) {
    const auto& r = j.at("Learning Rate Range");
    if (!r.is_array() || r.size() != 2) fail(ErrorKind::Config, "training.\"Learning Rate Range\": expected [min, max]");
    c.learning_rate_min = r[0].get<double>();
    c.learning_rate_max = r[1].get<double>();
  }
  std::string schedule = c.lr_schedule == "linear" ? "Linear decay to 0" : "Constant";
  get("LR Schedule", schedule);
  if (schedule == "Linear decay to 0" || schedule == "linear") c.lr_schedule = "linear";
  else if (schedule == "Constant" || schedule == "constant") c.lr_schedule = "constant";
  else fail(ErrorKind::Config, "training.\"LR Schedule\": expected \"Linear decay to 0\" or \"Constant\"");
  get("Batch Size", c.batch_size);
  get("Buffer Size", c.buffer_size);
  get("Num Epochs", c.num_epochs);
  get("Entropy Coefficient", c.entropy_coef);
  get("Clip Parameter", c.clip_epsilon);
  get("GAE Lambda", c.gae_lambda);
  get("Discount Factor", c.discount);
  get("Time Horizon", c.time_horizon);
  get("Num Parallel Envs", c.num_envs);
  get("Total Training Steps", c.total_steps);
  get("Checkpoint Interval", c.checkpoint_interval);
  get("Summary Frequency", c.summary_frequency);
  get("Value Loss Coefficient", c.value_loss_coef);
  get("Max Grad Norm", c.max_grad_norm);
  get("Normalize Advantages", c.normalize_advantages);
  c.validate();
  return c;
}

nlohmann::json to_json(const TrainingConfig& c) {
  return {{"Learning Rate", c.learning_rate},
          {"Learning Rate Range", {c.learning_rate_min, c.learning_rate_max}},
          {"LR Schedule", c.lr_schedule == "linear" ? "Linear decay to 0" : "Constant"},
          {"Batch Size", c.batch_size},
          {"Buffer Size", c.buffer_size},
          {"Num Epochs", c.num_epochs},
          {"Entropy Coefficient", c.entropy_coef},
          {"Clip Parameter", c.clip_epsilon},
          {"GAE Lambda", c.gae_lambda},
          {"Discount Factor", c.discount},
          {"Time Horizon", c.time_horizon},
          {"Num Parallel Envs", c.num_envs},
          {"Total Training Steps", c.total_steps},
          {"Checkpoint Interval", c.checkpoint_interval},
          {"Summary Frequency", c.summary_frequency},
          {"Value Loss Coefficient", c.value_loss_coef},
          {"Max Grad Norm", c.max_grad_norm},
          {"Normalize Advantages", c.normalize_advantages}};
}

double lr_at(std::int64_t step, const TrainingConfig& c) {
  if (c.lr_schedule == "constant") return c.learning_rate;
  if (step >= c.total_steps) return 0.0;
  if (step <= 0) return c.learning_rate;
  return c.learning_rate * (1.0 - static_cast<double>(step) / static_cast<double>(c.total_steps));
}

}  // namespace vf

#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "vf/env/world.hpp"

namespace vf {

// Environment config keys (all optional, defaults from WorldConfig):
//   arena_width, arena_height, agent_radius, target_radius, max_steps,
//   move_speed, strafe_speed, turn_rate, reward_target, reward_time,
//   render_height, render_width, field_of_view,
//   obstacles: [[x0, y0, x1, y1], ...]
// Unknown keys are rejected.
WorldConfig world_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const WorldConfig& c);

// Binary PGM (P5), 8-bit.
void write_pgm(const std::filesystem::path& path, const Observation& obs);

// Episode trace as JSON lines: {"step", "x", "y", "heading", "action": [f, s, r], "reward", "done"}.
class TraceWriter {
 public:
  explicit TraceWriter(const std::filesystem::path& path);
  void record(const WorldState& state, const Action& action, double reward, bool done);

 private:
  std::ofstream out_;
};

}  // namespace vf

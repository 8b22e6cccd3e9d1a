#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "vf/core/rng.hpp"

namespace vf {

// Axis-aligned box obstacle in world units.
struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

// Arena, dynamics, reward, and camera parameters. World units are arbitrary;
// the arena spans [0, arena_width] x [0, arena_height].
struct WorldConfig {
  double arena_width = 10.0;
  double arena_height = 10.0;
  double agent_radius = 0.2;
  double target_radius = 0.5;
  int max_steps = 500;
  double move_speed = 0.2;     // world units per step at forward = 1
  double strafe_speed = 0.1;   // world units per step at strafe = 1
  double turn_rate = 0.25;     // radians per step at rotate = 1
  double reward_target = 10.0;
  double reward_time = 0.01;
  int render_height = 86;
  int render_width = 155;
  double field_of_view = 2.0;  // horizontal, radians
  std::vector<Box> obstacles;

  // Throws ErrorKind::Config naming the offending field.
  void validate() const;

  // 43x78 rendering for quick runs.
  static WorldConfig small();
};

struct WorldState {
  double x = 0, y = 0;
  double heading = 0;  // radians, counter-clockwise from +x
  double target_x = 0, target_y = 0;
  int step = 0;
  bool done = false;
  Rng::State rng{};
};

// Body-frame command; each component is clamped to [-1, 1] before use.
struct Action {
  double forward = 0;
  double strafe = 0;
  double rotate = 0;

  Action clamped() const;
};

// Grayscale first-person image in [0, 1], row-major. `depth` holds the
// renderer's per-pixel distance (world units) and `depth_scale` the distance
// that maps to 1 for fog.
struct Observation {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;
  std::vector<float> depth;
  float depth_scale = 1.0f;
};

struct StepResult {
  WorldState state;
  Observation observation;
  double reward = 0;
  bool done = false;
  bool success = false;
};

// Pixels at or above this value belong to the target; nothing else renders that bright.
inline constexpr float kTargetPixel = 1.0f;

// Uniform placement over free space. Errors: Config if the arena has no room.
std::pair<WorldState, Observation> reset(const WorldConfig& config, std::uint64_t seed);

// Errors: Protocol when the episode is already done.
StepResult step(const WorldConfig& config, const WorldState& state, const Action& action);

Observation render(const WorldState& state, const WorldConfig& config);

// True when an agent disc centred at (x, y) overlaps a wall or obstacle.
bool agent_collides(const WorldConfig& config, double x, double y);

// Distance from (x, y) to the nearest wall or obstacle surface.
double wall_clearance(const WorldConfig& config, double x, double y);

// Stateful convenience wrapper owning one environment instance.
class ForageEnv {
 public:
  explicit ForageEnv(WorldConfig config);

  const Observation& reset(std::uint64_t seed);
  const StepResult& step(const Action& action);

  const WorldConfig& config() const { return config_; }
  const WorldState& state() const { return state_; }
  const Observation& observation() const { return obs_; }

 private:
  WorldConfig config_;
  WorldState state_;
  Observation obs_;
  StepResult last_;
};

}  // namespace vf

#include "vf/env/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "vf/core/error.hpp"

namespace vf {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kPlacementAttempts = 200000;

// Camera / shading constants.
constexpr double kWallHeight = 1.0;
constexpr double kEyeHeight = 0.5;
constexpr double kWallFalloff = 0.15;
constexpr double kWallTint[4] = {0.55, 0.45, 0.50, 0.40};  // west, east, south, north
constexpr double kObstacleTint = 0.35;
constexpr double kCeilingTop = 0.10, kCeilingHorizon = 0.18;
constexpr double kFloorHorizon = 0.20, kFloorBottom = 0.35;

double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a <= -kPi) a += 2.0 * kPi;
  return a;
}

double box_distance(const Box& b, double x, double y) {
  const double cx = std::clamp(x, b.x0, b.x1);
  const double cy = std::clamp(y, b.y0, b.y1);
  return std::hypot(x - cx, y - cy);
}

bool inside_box(const Box& b, double x, double y) {
  return x > b.x0 && x < b.x1 && y > b.y0 && y < b.y1;
}

struct RayHit {
  double distance = std::numeric_limits<double>::infinity();
  double tint = 0.0;
};

// Nearest wall or obstacle along a ray starting inside the arena.
RayHit cast_ray(const WorldConfig& c, double ox, double oy, double dx, double dy) {
  RayHit hit;
  auto consider = [&](double t, double tint) {
    if (t > 0.0 && t < hit.distance) {
      hit.distance = t;
      hit.tint = tint;
    }
  };
  if (dx > 0) consider((c.arena_width - ox) / dx, kWallTint[1]);
  if (dx < 0) consider((0.0 - ox) / dx, kWallTint[0]);
  if (dy > 0) consider((c.arena_height - oy) / dy, kWallTint[3]);
  if (dy < 0) consider((0.0 - oy) / dy, kWallTint[2]);
  for (const Box& b : c.obstacles) {
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    bool miss = false;
    auto slab = [&](double o, double d, double lo, double hi) {
      if (d == 0.0) {
        if (o < lo || o > hi) miss = true;
        return;
      }
      double a = (lo - o) / d, z = (hi - o) / d;
      if (a > z) std::swap(a, z);
      t0 = std::max(t0, a);
      t1 = std::min(t1, z);
    };
    slab(ox, dx, b.x0, b.x1);
    slab(oy, dy, b.y0, b.y1);
    if (!miss && t0 <= t1 && t1 > 0.0) consider(t0 > 0.0 ? t0 : t1, kObstacleTint);
  }
  return hit;
}

bool target_fits(const WorldConfig& c, double x, double y) {
  const double r = c.target_radius;
  if (x < r || x > c.arena_width - r || y < r || y > c.arena_height - r) return false;
  for (const Box& b : c.obstacles) {
    if (inside_box(b, x, y) || box_distance(b, x, y) < r) return false;
  }
  return true;
}

}  // namespace

void WorldConfig::validate() const {
  auto bad = [](const std::string& field, const std::string& why) {
    fail(ErrorKind::Config, "environment." + field + ": " + why);
  };
  if (!(arena_width > 0)) bad("arena_width", "must be positive");
  if (!(arena_height > 0)) bad("arena_height", "must be positive");
  if (!(agent_radius > 0)) bad("agent_radius", "must be positive");
  if (!(target_radius > 0)) bad("target_radius", "must be positive");
  if (!(agent_radius + target_radius < std::min(arena_width, arena_height) / 4.0)) {
    bad("target_radius", "agent_radius + target_radius must be below min(arena dims)/4");
  }
  if (max_steps < 1) bad("max_steps", "must be at least 1");
  if (!(move_speed >= 0) || !(strafe_speed >= 0) || !(turn_rate >= 0)) bad("move_speed", "speeds must be non-negative");
  if (!(reward_target > 0)) bad("reward_target", "must be positive");
  if (!(reward_time >= 0)) bad("reward_time", "must be non-negative");
  if (render_height < 8 || render_width < 8) bad("render_height", "resolution must be at least 8x8");
  if (!(field_of_view > 0 && field_of_view < kPi)) bad("field_of_view", "must lie in (0, pi)");
  for (const Box& b : obstacles) {
    if (!(b.x1 > b.x0 && b.y1 > b.y0)) bad("obstacles", "boxes need x1 > x0 and y1 > y0");
  }
}

WorldConfig WorldConfig::small() {
  WorldConfig c;
  c.render_height = 43;
  c.render_width = 78;
  return c;
}

Action Action::clamped() const {
  return Action{std::clamp(forward, -1.0, 1.0), std::clamp(strafe, -1.0, 1.0), std::clamp(rotate, -1.0, 1.0)};
}

bool agent_collides(const WorldConfig& c, double x, double y) {
  const double r = c.agent_radius;
  if (x < r || x > c.arena_width - r || y < r || y > c.arena_height - r) return true;
  for (const Box& b : c.obstacles) {
    if (inside_box(b, x, y) || box_distance(b, x, y) < r) return true;
  }
  return false;
}

double wall_clearance(const WorldConfig& c, double x, double y) {
  double d = std::min({x, c.arena_width - x, y, c.arena_height - y});
  for (const Box& b : c.obstacles) d = std::min(d, inside_box(b, x, y) ? 0.0 : box_distance(b, x, y));
  return d;
}

std::pair<WorldState, Observation> reset(const WorldConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  WorldState s;
  bool placed = false;
  for (int i = 0; i < kPlacementAttempts && !placed; ++i) {
    const double x = rng.uniform(config.agent_radius, config.arena_width - config.agent_radius);
    const double y = rng.uniform(config.agent_radius, config.arena_height - config.agent_radius);
    if (!agent_collides(config, x, y)) {
      s.x = x;
      s.y = y;
      placed = true;
    }
  }
  if (!placed) fail(ErrorKind::Config, "environment has no free space for the agent");
  s.heading = rng.uniform(-kPi, kPi);
  placed = false;
  const double min_sep = config.agent_radius + config.target_radius;
  for (int i = 0; i < kPlacementAttempts && !placed; ++i) {
    const double x = rng.uniform(config.target_radius, config.arena_width - config.target_radius);
    const double y = rng.uniform(config.target_radius, config.arena_height - config.target_radius);
    if (target_fits(config, x, y) && std::hypot(x - s.x, y - s.y) > min_sep) {
      s.target_x = x;
      s.target_y = y;
      placed = true;
    }
  }
  if (!placed) fail(ErrorKind::Config, "environment has no free space for the target");
  s.rng = rng.state();
  return {s, render(s, config)};
}

StepResult step(const WorldConfig& config, const WorldState& state, const Action& action) {
  if (state.done) fail(ErrorKind::Protocol, "step called on a finished episode");
  const Action a = action.clamped();
  StepResult r;
  WorldState& s = r.state;
  s = state;
  s.heading = wrap_angle(s.heading + a.rotate * config.turn_rate);
  const double ch = std::cos(s.heading), sh = std::sin(s.heading);
  const double fwd = a.forward * config.move_speed;
  const double side = a.strafe * config.strafe_speed;  // positive = left
  const double dx = fwd * ch - side * sh;
  const double dy = fwd * sh + side * ch;

  // Arena walls clamp each axis independently, which slides along them.
  const double r_agent = config.agent_radius;
  auto clamp_x = [&](double x) { return std::clamp(x, r_agent, config.arena_width - r_agent); };
  auto clamp_y = [&](double y) { return std::clamp(y, r_agent, config.arena_height - r_agent); };
  const double nx = clamp_x(s.x + dx), ny = clamp_y(s.y + dy);
  if (!agent_collides(config, nx, ny)) {
    s.x = nx;
    s.y = ny;
  } else if (!agent_collides(config, nx, s.y)) {
    s.x = nx;
  } else if (!agent_collides(config, s.x, ny)) {
    s.y = ny;
  }

  s.step += 1;
  r.success = std::hypot(s.x - s.target_x, s.y - s.target_y) <= config.agent_radius + config.target_radius;
  r.reward = (r.success ? config.reward_target : 0.0) - config.reward_time;
  r.done = r.success || s.step >= config.max_steps;
  s.done = r.done;
  r.observation = render(s, config);
  return r;
}

Observation render(const WorldState& s, const WorldConfig& c) {
  const int H = c.render_height, W = c.render_width;
  Observation obs;
  obs.height = H;
  obs.width = W;
  obs.pixels.assign(static_cast<std::size_t>(H) * W, 0.0f);
  obs.depth.assign(static_cast<std::size_t>(H) * W, 0.0f);
  const double max_depth = std::hypot(c.arena_width, c.arena_height);
  obs.depth_scale = static_cast<float>(max_depth);

  const double focal = (W / 2.0) / std::tan(c.field_of_view / 2.0);
  const double cx = W / 2.0, cy = H / 2.0;

  // Target direction in the camera frame (forward, left, up).
  const double tdx = s.target_x - s.x, tdy = s.target_y - s.y;
  const double tdist = std::hypot(tdx, tdy);
  const double bearing = wrap_angle(std::atan2(tdy, tdx) - s.heading);
  const double cos_radius = tdist > c.target_radius ? std::cos(std::asin(c.target_radius / tdist)) : -1.0;
  const double tf = std::cos(bearing), tl = std::sin(bearing);

  for (int col = 0; col < W; ++col) {
    const double lateral = cx - (col + 0.5);
    const double theta = std::atan2(lateral, focal);
    const double angle = s.heading + theta;
    const RayHit hit = cast_ray(c, s.x, s.y, std::cos(angle), std::sin(angle));
    const double perp = hit.distance * std::cos(theta);
    const double top = cy - focal * (kWallHeight - kEyeHeight) / perp;
    const double bottom = cy + focal * kEyeHeight / perp;
    const double wall_shade = hit.tint / (1.0 + kWallFalloff * hit.distance);
    const double ray_len = std::sqrt(focal * focal + lateral * lateral);

    for (int row = 0; row < H; ++row) {
      const std::size_t idx = static_cast<std::size_t>(row) * W + col;
      const double yc = row + 0.5;
      double shade, depth;
      if (yc >= top && yc <= bottom) {
        shade = wall_shade;
        depth = hit.distance;
      } else if (yc < top) {
        const double t = yc / cy;
        shade = kCeilingTop + (kCeilingHorizon - kCeilingTop) * t;
        depth = (kWallHeight - kEyeHeight) * focal / (cy - yc) / std::cos(theta);
      } else {
        const double t = (yc - cy) / (H - cy);
        shade = kFloorHorizon + (kFloorBottom - kFloorHorizon) * t;
        depth = kEyeHeight * focal / (yc - cy) / std::cos(theta);
      }

      const double up = cy - yc;
      const double norm = std::sqrt(ray_len * ray_len + up * up);
      const double cos_to_target = (focal * tf + lateral * tl) / norm;
      if (cos_to_target >= cos_radius && tdist - c.target_radius < hit.distance) {
        shade = kTargetPixel;
        depth = std::max(tdist - c.target_radius, 0.0);
      }
      obs.pixels[idx] = static_cast<float>(shade);
      obs.depth[idx] = static_cast<float>(std::min(depth, max_depth));
    }
  }
  return obs;
}

ForageEnv::ForageEnv(WorldConfig config) : config_(std::move(config)) { config_.validate(); }

const Observation& ForageEnv::reset(std::uint64_t seed) {
  auto [state, obs] = vf::reset(config_, seed);
  state_ = state;
  obs_ = std::move(obs);
  return obs_;
}

const StepResult& ForageEnv::step(const Action& action) {
  last_ = vf::step(config_, state_, action);
  state_ = last_.state;
  obs_ = last_.observation;
  return last_;
}

}  // namespace vf

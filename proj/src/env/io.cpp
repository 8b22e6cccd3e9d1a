#include "vf/env/io.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vf/core/error.hpp"

namespace vf {

WorldConfig world_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::Config, "environment: expected an object");
  static const std::set<std::string> known = {
      "arena_width",   "arena_height",  "agent_radius",  "target_radius", "max_steps",
      "move_speed",    "strafe_speed",  "turn_rate",     "reward_target", "reward_time",
      "render_height", "render_width",  "field_of_view", "obstacles"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) fail(ErrorKind::Config, "environment." + key + ": unknown key");
  }
  WorldConfig c;
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Config, std::string("environment.") + key + ": " + e.what());
    }
  };
  get("arena_width", c.arena_width);
  get("arena_height", c.arena_height);
  get("agent_radius", c.agent_radius);
  get("target_radius", c.target_radius);
  get("max_steps", c.max_steps);
  get("move_speed", c.move_speed);
  get("strafe_speed", c.strafe_speed);
  get("turn_rate", c.turn_rate);
  get("reward_target", c.reward_target);
  get("reward_time", c.reward_time);
  get("render_height", c.render_height);
  get("render_width", c.render_width);
  get("field_of_view", c.field_of_view);
  if (j.contains("obstacles")) {
    for (const auto& b : j.at("obstacles")) {
      if (!b.is_array() || b.size() != 4) fail(ErrorKind::Config, "environment.obstacles: each box is [x0, y0, x1, y1]");
      c.obstacles.push_back(Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
    }
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const WorldConfig& c) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const Box& b : c.obstacles) boxes.push_back({b.x0, b.y0, b.x1, b.y1});
  return {{"arena_width", c.arena_width},     {"arena_height", c.arena_height},
          {"agent_radius", c.agent_radius},   {"target_radius", c.target_radius},
          {"max_steps", c.max_steps},         {"move_speed", c.move_speed},
          {"strafe_speed", c.strafe_speed},   {"turn_rate", c.turn_rate},
          {"reward_target", c.reward_target}, {"reward_time", c.reward_time},
          {"render_height", c.render_height}, {"render_width", c.render_width},
          {"field_of_view", c.field_of_view}, {"obstacles", boxes}};
}

void write_pgm(const std::filesystem::path& path, const Observation& obs) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  f << "P5\n" << obs.width << " " << obs.height << "\n255\n";
  for (float v : obs.pixels) {
    const auto byte = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    f.put(static_cast<char>(byte));
  }
}

TraceWriter::TraceWriter(const std::filesystem::path& path) : out_(path) {
  if (!out_) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
}

void TraceWriter::record(const WorldState& s, const Action& a, double reward, bool done) {
  nlohmann::json line = {{"step", s.step},       {"x", s.x},
                         {"y", s.y},             {"heading", s.heading},
                         {"action", {a.forward, a.strafe, a.rotate}},
                         {"reward", reward},     {"done", done}};
  out_ << line.dump() << "\n";
}

}  // namespace vf

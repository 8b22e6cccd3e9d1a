#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vf/core/error.hpp"
#include "vf/env/io.hpp"
#include "vf/env/perturb.hpp"
#include "vf/env/world.hpp"

using namespace vf;

namespace {

constexpr double kPi = std::numbers::pi;

WorldConfig tiny_render() {
  WorldConfig c;
  c.render_height = 16;
  c.render_width = 24;
  return c;
}

double wrap(double a) { return std::remainder(a, 2 * kPi); }

// Independent circle-vs-box distance: zero inside, Euclidean outside.
double box_gap(const Box& b, double x, double y) {
  const double dx = std::max({b.x0 - x, 0.0, x - b.x1});
  const double dy = std::max({b.y0 - y, 0.0, y - b.y1});
  return std::hypot(dx, dy);
}

bool legal(const WorldConfig& c, const WorldState& s) {
  const double r = c.agent_radius;
  if (s.x < r || s.y < r || s.x > c.arena_width - r || s.y > c.arena_height - r) return false;
  for (const Box& b : c.obstacles) {
    if (box_gap(b, s.x, s.y) < r - 1e-12) return false;
  }
  return true;
}

Action steer_from_state(const WorldState& s) {
  const double bearing = wrap(std::atan2(s.target_y - s.y, s.target_x - s.x) - s.heading);
  return {std::abs(bearing) < 0.3 ? 1.0 : 0.0, 0.0, std::clamp(bearing * 4.0, -1.0, 1.0)};
}

// Steers on pixels alone: columns holding target-bright pixels.
Action steer_from_pixels(const Observation& o, float threshold) {
  double sum = 0;
  int n = 0;
  for (int y = 0; y < o.height; ++y) {
    for (int x = 0; x < o.width; ++x) {
      if (o.pixels[static_cast<std::size_t>(y) * o.width + x] >= threshold) {
        sum += x + 0.5;
        ++n;
      }
    }
  }
  if (n == 0) return {0.0, 0.0, 1.0};
  const double offset = (o.width / 2.0 - sum / n) / (o.width / 2.0);  // +1 = left edge
  return {std::abs(offset) < 0.25 ? 1.0 : 0.3, 0.0, std::clamp(offset * 3.0, -1.0, 1.0)};
}

}  // namespace

TEST_CASE("reset is deterministic and valid") {
  const auto c = WorldConfig::small();
  const auto [s1, o1] = reset(c, 42);
  const auto [s2, o2] = reset(c, 42);
  CHECK(o1.pixels == o2.pixels);
  CHECK(s1.x == s2.x);
  CHECK(s1.rng == s2.rng);
  CHECK(o1.height == 43);
  CHECK(o1.width == 78);
  CHECK(std::all_of(o1.pixels.begin(), o1.pixels.end(), [](float v) { return v >= 0 && v <= 1; }));
  CHECK(legal(c, s1));
  CHECK(std::hypot(s1.x - s1.target_x, s1.y - s1.target_y) > c.agent_radius + c.target_radius);
  const auto [s3, o3] = reset(c, 43);
  CHECK(o3.pixels != o1.pixels);
}

TEST_CASE("target placement is uniform over quadrants") {
  const auto c = tiny_render();
  int q[4] = {0, 0, 0, 0};
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const auto s = reset(c, derive_seed(5, kSeedEnv, static_cast<std::uint64_t>(i))).first;
    q[(s.target_x > c.arena_width / 2 ? 1 : 0) + (s.target_y > c.arena_height / 2 ? 2 : 0)]++;
  }
  double chi2 = 0;
  for (int k : q) chi2 += (k - n / 4.0) * (k - n / 4.0) / (n / 4.0);
  for (int k : q) CHECK(k > 0);
  CHECK(chi2 < 16.27);  // 3 dof, p = 0.001
}

TEST_CASE("reset with a single free cell places the agent there") {
  auto c = tiny_render();
  c.obstacles = {Box{3, 0, 10, 10}, Box{0, 2, 3, 10}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = reset(c, seed).first;
    CHECK(s.x < 3);
    CHECK(s.y < 2);
    CHECK(legal(c, s));
  }
  c.obstacles = {Box{0, 0, 10, 10}};
  try {
    reset(c, 1);
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }
}

TEST_CASE("config invariants are enforced") {
  auto c = tiny_render();
  c.max_steps = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = tiny_render();
  c.target_radius = 2.4;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("step dynamics") {
  const auto c = tiny_render();
  WorldState s;
  s.x = 5;
  s.y = 5;
  s.heading = 0.3;
  s.target_x = 1;
  s.target_y = 1;

  auto r = step(c, s, Action{});
  CHECK(r.state.x == 5);
  CHECK(r.state.y == 5);
  CHECK(r.state.heading == 0.3);
  CHECK(r.reward == doctest::Approx(-c.reward_time));
  CHECK(!r.done);
  CHECK(r.state.step == 1);

  r = step(c, s, Action{1, 0, 0});
  CHECK(r.state.x == doctest::Approx(5 + c.move_speed * std::cos(0.3)));
  CHECK(r.state.y == doctest::Approx(5 + c.move_speed * std::sin(0.3)));

  r = step(c, s, Action{0, 1, 0});  // strafe left of heading
  CHECK(r.state.x == doctest::Approx(5 - c.strafe_speed * std::sin(0.3)));
  CHECK(r.state.y == doctest::Approx(5 + c.strafe_speed * std::cos(0.3)));

  r = step(c, s, Action{0, 0, 5});  // clamped to 1
  CHECK(r.state.heading == doctest::Approx(0.3 + c.turn_rate));

  WorldState near = s;
  near.heading = 0;
  near.target_x = near.x + c.agent_radius + c.target_radius + 0.5 * c.move_speed;
  near.target_y = near.y;
  r = step(c, near, Action{1, 0, 0});
  CHECK(r.success);
  CHECK(r.done);
  CHECK(r.reward == doctest::Approx(c.reward_target - c.reward_time));
  CHECK(r.state.done);
  try {
    step(c, r.state, Action{});
    FAIL("expected a protocol error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Protocol);
  }

  auto c1 = c;
  c1.max_steps = 1;
  r = step(c1, s, Action{});
  CHECK(r.done);
  CHECK(!r.success);
}

TEST_CASE("walls and obstacles slide without penetration") {
  auto c = tiny_render();
  c.obstacles = {Box{6, 4, 7, 6}};
  WorldState s;
  s.x = 1.0;
  s.y = 5.0;
  s.heading = kPi - 0.4;  // into the west wall at a slant
  s.target_x = 9;
  s.target_y = 9;
  for (int i = 0; i < 40; ++i) s = step(c, s, Action{1, 0, 0}).state;
  CHECK(s.x == doctest::Approx(c.agent_radius));
  CHECK(s.y > 5.0 + 1.0);  // slid north along the wall

  s.x = 5.0;
  s.y = 5.0;
  s.heading = 0.2;
  s.step = 0;
  double before = s.y;
  for (int i = 0; i < 30; ++i) {
    s = step(c, s, Action{1, 0, 0}).state;
    CHECK(box_gap(c.obstacles[0], s.x, s.y) >= c.agent_radius - 1e-12);
  }
  CHECK(s.x <= 6.0 - c.agent_radius + 1e-12);
  CHECK(s.y > before);
}

TEST_CASE("random action fuzzing never leaves free space") {
  auto c = tiny_render();
  c.obstacles = {Box{2, 2, 3, 8}, Box{6, 1, 8, 3}, Box{5, 6, 9, 7}};
  Rng rng(9);
  auto s = reset(c, 1).first;
  c.reward_target = 1;
  for (int i = 0; i < 100000; ++i) {
    const Action a{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    auto r = step(c, s, a);
    REQUIRE(legal(c, r.state));
    REQUIRE(r.state.step <= c.max_steps);
    s = r.done ? reset(c, rng.next()).first : r.state;
  }
}

TEST_CASE("render geometry") {
  const auto c = WorldConfig::small();
  WorldState s;
  s.x = 5;
  s.y = 5;
  s.heading = 0;
  s.target_x = 6.5;
  s.target_y = 5;
  const auto o = render(s, c);
  CHECK(render(s, c).pixels == o.pixels);
  int lo = c.render_width, hi = -1, count = 0;
  for (int y = 0; y < c.render_height; ++y) {
    for (int x = 0; x < c.render_width; ++x) {
      if (o.pixels[static_cast<std::size_t>(y) * c.render_width + x] >= kTargetPixel) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
        ++count;
      }
    }
  }
  REQUIRE(count > 0);
  CHECK((lo + hi + 1) / 2.0 == doctest::Approx(c.render_width / 2.0).epsilon(0.03));

  s.heading = kPi;
  const auto behind = render(s, c);
  CHECK(std::none_of(behind.pixels.begin(), behind.pixels.end(), [](float v) { return v >= kTargetPixel; }));

  // Angular size follows 1/distance.
  auto width_at = [&](double d) {
    WorldState t = s;
    t.heading = 0;
    t.target_x = t.x + d;
    const auto img = render(t, c);
    const int row = c.render_height / 2;
    int n = 0;
    for (int x = 0; x < c.render_width; ++x) n += img.pixels[static_cast<std::size_t>(row) * c.render_width + x] >= kTargetPixel;
    return n;
  };
  CHECK(width_at(2.0) > width_at(4.0));
  CHECK(width_at(2.0) == doctest::Approx(2 * width_at(4.0)).epsilon(0.25));
}

TEST_CASE("perturbation formulas") {
  const auto c = WorldConfig::small();
  const auto o = reset(c, 3).second;

  CHECK(apply_perturbation(o, PerturbationSpec{}).pixels == o.pixels);
  CHECK(apply_perturbation(o, PerturbationSpec::parse("brightness:0")).pixels == o.pixels);
  CHECK(apply_perturbation(o, PerturbationSpec::parse("contrast:1")).pixels == o.pixels);

  const auto fog_inf = apply_perturbation(o, PerturbationSpec{PerturbationKind::Fog, INFINITY, 0});
  CHECK(std::all_of(fog_inf.pixels.begin(), fog_inf.pixels.end(), [](float v) { return v == kFogGray; }));

  const auto fog = apply_perturbation(o, PerturbationSpec::parse("fog:1"));
  for (std::size_t i = 0; i < o.pixels.size(); i += 97) {
    const double keep = std::exp(-1.0 * o.depth[i] / o.depth_scale);
    CHECK(fog.pixels[i] == doctest::Approx(o.pixels[i] * keep + kFogGray * (1 - keep)).epsilon(1e-6));
  }

  const auto bright = apply_perturbation(o, PerturbationSpec::parse("brightness:0.3"));
  const auto contrast = apply_perturbation(o, PerturbationSpec::parse("contrast:2"));
  for (std::size_t i = 0; i < o.pixels.size(); i += 31) {
    CHECK(bright.pixels[i] == doctest::Approx(std::clamp(o.pixels[i] + 0.3, 0.0, 1.0)).epsilon(1e-6));
    CHECK(contrast.pixels[i] == doctest::Approx(std::clamp((o.pixels[i] - 0.5) * 2 + 0.5, 0.0, 1.0)).epsilon(1e-6));
  }

  auto noise = PerturbationSpec::parse("noise:0.1");
  noise.seed = 11;
  const auto n1 = apply_perturbation(o, noise, 4);
  CHECK(apply_perturbation(o, noise, 4).pixels == n1.pixels);
  CHECK(apply_perturbation(o, noise, 5).pixels != n1.pixels);
  CHECK(std::all_of(n1.pixels.begin(), n1.pixels.end(), [](float v) { return v >= 0 && v <= 1; }));

  auto mask = PerturbationSpec::parse("mask:0.25");
  mask.seed = 2;
  const auto m = apply_perturbation(o, mask);
  const auto zeros = std::count(m.pixels.begin(), m.pixels.end(), 0.0f);
  CHECK(static_cast<double>(zeros) / m.pixels.size() == doctest::Approx(0.25).epsilon(0.08));

  CHECK_THROWS_AS(PerturbationSpec::parse("blur:1"), Error);
  CHECK_THROWS_AS(PerturbationSpec::parse("contrast:9"), Error);
  CHECK_THROWS_AS(PerturbationSpec::parse("brightness:0.6"), Error);
  CHECK_THROWS_AS(PerturbationSpec::parse("mask:0.75"), Error);
  CHECK(PerturbationSpec::parse("fog:0.5").name() == "fog:0.5");
}

TEST_CASE("batteries") {
  CHECK(perturbation_battery("clean").empty());
  CHECK(perturbation_battery("standard").size() == 13);
  for (const auto& p : perturbation_battery("photometric")) {
    CHECK((p.kind == PerturbationKind::Brightness || p.kind == PerturbationKind::Contrast));
  }
  CHECK_THROWS_AS(perturbation_battery("nope"), Error);
}

TEST_CASE("state oracle solves obstacle-free arenas") {
  const auto c = tiny_render();
  for (std::uint64_t e = 0; e < 200; ++e) {
    auto s = reset(c, derive_seed(77, kSeedEval, e)).first;
    bool success = false;
    for (int t = 0; t < c.max_steps && !success; ++t) {
      const auto r = step(c, s, steer_from_state(s));
      success = r.success;
      s = r.state;
    }
    CHECK(success);
  }
}

TEST_CASE("pixel oracle survives brightness shifts") {
  const auto c = WorldConfig::small();
  // Background never exceeds 0.55; +-0.2 keeps the target strictly brighter.
  const float threshold = 0.775f;
  for (double offset : {-0.2, 0.2}) {
    const PerturbationSpec p{PerturbationKind::Brightness, offset, 0};
    int wins = 0;
    const int episodes = 100;
    for (int e = 0; e < episodes; ++e) {
      auto [s, o] = reset(c, derive_seed(5, kSeedEval, static_cast<std::uint64_t>(e)));
      for (int t = 0; t < c.max_steps; ++t) {
        const auto r = step(c, s, steer_from_pixels(apply_perturbation(o, p), threshold));
        s = r.state;
        o = r.observation;
        if (r.done) {
          wins += r.success;
          break;
        }
      }
    }
    CHECK(wins >= 95);
  }
}

TEST_CASE("trajectories are reproducible") {
  const auto c = tiny_render();
  auto run = [&] {
    ForageEnv env(c);
    env.reset(123);
    Rng rng(3);
    std::vector<float> trace;
    for (int t = 0; t < 200; ++t) {
      const auto& r = env.step(Action{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
      trace.push_back(static_cast<float>(r.state.x));
      trace.insert(trace.end(), r.observation.pixels.begin(), r.observation.pixels.end());
      if (r.done) break;
    }
    return trace;
  };
  CHECK(run() == run());
}

TEST_CASE("world config JSON round trip") {
  auto c = tiny_render();
  c.obstacles = {Box{1, 1, 2, 2}};
  c.max_steps = 300;
  const auto back = world_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.obstacles.size() == 1);
  CHECK_THROWS_AS(world_config_from_json(nlohmann::json{{"arena_widht", 3}}), Error);
}

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vf/env/world.hpp"

namespace vf {

enum class PerturbationKind { None, Fog, Brightness, Contrast, Noise, Mask };

// Evaluation-time image corruption. `strength` is the fog density, brightness
// offset, contrast gain, noise sigma, or occluded fraction depending on kind.
struct PerturbationSpec {
  PerturbationKind kind = PerturbationKind::None;
  double strength = 0.0;
  std::uint64_t seed = 0;

  // "none", "fog:1", "brightness:-0.3", "contrast:2", "noise:0.05", "mask:0.25"
  std::string name() const;
  // Inverse of name(). Errors: Config for unknown kinds or out-of-range strengths.
  static PerturbationSpec parse(const std::string& text);
  void validate() const;
};

inline constexpr float kFogGray = 0.6f;

// fog:        out = img * e^(-density*d) + fog_gray * (1 - e^(-density*d)), d = depth / depth_scale
// brightness: out = img + offset
// contrast:   out = (img - 0.5) * gain + 0.5
// noise:      out = img + N(0, sigma^2), stream seeded by (seed, frame)
// mask:       zero a rectangle covering `fraction` of the image, placed by seed
// Every output is clamped to [0, 1]; `none` returns the input unchanged.
Observation apply_perturbation(const Observation& img, const PerturbationSpec& spec, std::uint64_t frame = 0);

// Named held-out batteries: "clean", "standard" (13 conditions),
// "photometric" (brightness and contrast only).
std::vector<PerturbationSpec> perturbation_battery(const std::string& name);
std::vector<std::string> battery_names();

}  // namespace vf

#include "vf/env/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "vf/core/error.hpp"
#include "vf/core/rng.hpp"

namespace vf {

namespace {

const char* kind_name(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::None: return "none";
    case PerturbationKind::Fog: return "fog";
    case PerturbationKind::Brightness: return "brightness";
    case PerturbationKind::Contrast: return "contrast";
    case PerturbationKind::Noise: return "noise";
    case PerturbationKind::Mask: return "mask";
  }
  return "?";
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

std::string PerturbationSpec::name() const {
  if (kind == PerturbationKind::None) return "none";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s:%g", kind_name(kind), strength);
  return buf;
}

PerturbationSpec PerturbationSpec::parse(const std::string& text) {
  PerturbationSpec spec;
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  if (kind == "none" && colon == std::string::npos) return spec;
  if (kind == "fog") spec.kind = PerturbationKind::Fog;
  else if (kind == "brightness") spec.kind = PerturbationKind::Brightness;
  else if (kind == "contrast") spec.kind = PerturbationKind::Contrast;
  else if (kind == "noise") spec.kind = PerturbationKind::Noise;
  else if (kind == "mask") spec.kind = PerturbationKind::Mask;
  else fail(ErrorKind::Config, "unknown perturbation kind '" + text + "'");
  if (colon == std::string::npos) fail(ErrorKind::Config, "perturbation '" + text + "' needs a strength (kind:value)");
  try {
    std::size_t used = 0;
    spec.strength = std::stod(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    fail(ErrorKind::Config, "bad perturbation strength in '" + text + "'");
  }
  spec.validate();
  return spec;
}

void PerturbationSpec::validate() const {
  auto bad = [&](const char* why) { fail(ErrorKind::Config, name() + ": " + why); };
  switch (kind) {
    case PerturbationKind::None: break;
    case PerturbationKind::Fog: if (!(strength >= 0)) bad("fog density must be >= 0"); break;
    case PerturbationKind::Brightness: if (!(strength >= -0.5 && strength <= 0.5)) bad("offset must lie in [-0.5, 0.5]"); break;
    case PerturbationKind::Contrast: if (!(strength >= 0.25 && strength <= 4)) bad("gain must lie in [0.25, 4]"); break;
    case PerturbationKind::Noise: if (!(strength >= 0)) bad("sigma must be >= 0"); break;
    case PerturbationKind::Mask: if (!(strength >= 0 && strength <= 0.5)) bad("fraction must lie in [0, 0.5]"); break;
  }
}

Observation apply_perturbation(const Observation& img, const PerturbationSpec& spec, std::uint64_t frame) {
  spec.validate();
  Observation out = img;
  auto& px = out.pixels;
  switch (spec.kind) {
    case PerturbationKind::None:
      return out;
    case PerturbationKind::Fog: {
      if (img.depth.size() != px.size()) fail(ErrorKind::Data, "fog needs the renderer's depth map");
      for (std::size_t i = 0; i < px.size(); ++i) {
        const double d = static_cast<double>(img.depth[i]) / img.depth_scale;
        const double keep = std::isinf(spec.strength) ? 0.0 : std::exp(-spec.strength * d);
        px[i] = clamp01(px[i] * keep + kFogGray * (1.0 - keep));
      }
      break;
    }
    case PerturbationKind::Brightness:
      for (auto& v : px) v = clamp01(v + spec.strength);
      break;
    case PerturbationKind::Contrast:
      for (auto& v : px) v = clamp01((v - 0.5) * spec.strength + 0.5);
      break;
    case PerturbationKind::Noise: {
      Rng rng(derive_seed(spec.seed, kSeedNoise, frame));
      for (auto& v : px) v = clamp01(v + spec.strength * rng.normal());
      break;
    }
    case PerturbationKind::Mask: {
      const double side = std::sqrt(spec.strength);
      const int mh = static_cast<int>(std::lround(img.height * side));
      const int mw = static_cast<int>(std::lround(img.width * side));
      if (mh == 0 || mw == 0) break;
      Rng rng(derive_seed(spec.seed, kSeedNoise, 0));
      const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height - mh + 1)));
      const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width - mw + 1)));
      for (int y = y0; y < y0 + mh; ++y) {
        for (int x = x0; x < x0 + mw; ++x) px[static_cast<std::size_t>(y) * img.width + x] = 0.0f;
      }
      break;
    }
  }
  return out;
}

std::vector<PerturbationSpec> perturbation_battery(const std::string& name) {
  auto make = [](PerturbationKind k, double s) { return PerturbationSpec{k, s, 0}; };
  using K = PerturbationKind;
  if (name == "clean") return {};
  if (name == "photometric") {
    return {make(K::Brightness, -0.3), make(K::Brightness, -0.1), make(K::Brightness, 0.1),
            make(K::Brightness, 0.3), make(K::Contrast, 0.5), make(K::Contrast, 2.0)};
  }
  if (name == "standard") {
    return {make(K::Fog, 0.5),         make(K::Fog, 1.0),        make(K::Fog, 2.0),
            make(K::Brightness, -0.3), make(K::Brightness, -0.1), make(K::Brightness, 0.1),
            make(K::Brightness, 0.3),  make(K::Contrast, 0.5),    make(K::Contrast, 2.0),
            make(K::Noise, 0.05),      make(K::Noise, 0.1),       make(K::Mask, 0.1),
            make(K::Mask, 0.25)};
  }
  std::string known;
  for (const auto& n : battery_names()) known += (known.empty() ? "" : ", ") + n;
  fail(ErrorKind::Config, "unknown battery '" + name + "'; known batteries: " + known);
}

std::vector<std::string> battery_names() { return {"clean", "standard", "photometric"}; }

}  // namespace vf

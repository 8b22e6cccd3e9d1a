#include "vf/eval/cortex.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vf/core/error.hpp"
#include "vf/core/rng.hpp"
#include "vf/tensor/kernels.hpp"

namespace vf {

namespace {

struct LayerDef {
  int kernel, stride, channels;
};

constexpr LayerDef kDefs[SurrogateCortex::kLayers] = {{5, 2, 8}, {3, 2, 16}, {3, 2, 8}};

}  // namespace

SurrogateCortex::SurrogateCortex(int height, int width, std::uint64_t seed, int sites, double sigma)
    : height_(height), width_(width), seed_(seed), sigma_(sigma) {
  if (sites <= 0) fail(ErrorKind::Config, "surrogate cortex needs at least one site");
  if (!(sigma >= 0)) fail(ErrorKind::Config, "surrogate response noise must be non-negative");
  Rng rng(derive_seed(seed, kSeedCortex, 0));
  int h = height, w = width, c = 1;
  for (const auto& d : kDefs) {
    const int oh = (h - d.kernel) / d.stride + 1, ow = (w - d.kernel) / d.stride + 1;
    if (h < d.kernel || w < d.kernel) {
      fail(ErrorKind::Config, "stimuli of " + std::to_string(height) + "x" + std::to_string(width) +
                                  " are too small for the surrogate cortex");
    }
    Tensor<float> k({d.kernel, d.kernel, c, d.channels});
    const double scale = std::sqrt(2.0 / (d.kernel * d.kernel * c));
    for (auto& v : k.storage()) v = static_cast<float>(scale * rng.normal());
    kernels_.push_back(std::move(k));
    strides_.push_back(d.stride);
    shapes_.push_back({oh, ow, d.channels});
    h = oh;
    w = ow;
    c = d.channels;
  }
  for (int l = 0; l < kLayers; ++l) {
    const int count = sites / kLayers + (l < sites % kLayers ? 1 : 0);
    const Shape& s = shapes_[l];
    const long long units = static_cast<long long>(s[0]) * s[1] * s[2];
    if (count > units) fail(ErrorKind::Config, "layer " + std::to_string(l + 1) + " has too few units for the sites");
    std::set<long long> taken;
    while (static_cast<int>(taken.size()) < count) {
      const long long u = static_cast<long long>(rng.below(static_cast<std::uint64_t>(units)));
      if (!taken.insert(u).second) continue;
      sites_.push_back(Site{l, static_cast<int>(u / (s[1] * s[2])), static_cast<int>((u / s[2]) % s[1]),
                            static_cast<int>(u % s[2])});
    }
  }
}

Shape SurrogateCortex::layer_shape(int layer) const {
  if (layer < 0 || layer >= kLayers) fail(ErrorKind::Config, "cortex layer must be 0, 1 or 2");
  return shapes_[layer];
}

std::vector<Tensor<float>> SurrogateCortex::forward(const Observation& o) const {
  if (o.height != height_ || o.width != width_) {
    fail(ErrorKind::Dimension, "cortex expects " + std::to_string(height_) + "x" + std::to_string(width_) +
                                   " stimuli, got " + std::to_string(o.height) + "x" + std::to_string(o.width));
  }
  std::vector<Tensor<float>> acts;
  Tensor<float> x({1, height_, width_, 1});
  for (std::size_t i = 0; i < o.pixels.size(); ++i) x[i] = o.pixels[i] - 0.5f;
  for (int l = 0; l < kLayers; ++l) {
    kernels::Conv2dGeometry g;
    g.in_h = x.dim(1);
    g.in_w = x.dim(2);
    g.in_c = x.dim(3);
    g.k_h = g.k_w = kDefs[l].kernel;
    g.out_c = kDefs[l].channels;
    g.stride = strides_[l];
    Tensor<float> y({1, g.out_h(), g.out_w(), g.out_c});
    std::vector<float> bias(static_cast<std::size_t>(g.out_c), 0.0f);
    kernels::conv2d_forward(g, x.data().data(), kernels_[l].data().data(), bias.data(), y.data().data());
    for (auto& v : y.storage()) v = std::max(v, 0.0f);
    acts.push_back(y);
    x = std::move(y);
  }
  return acts;
}

Matrix SurrogateCortex::layer_activations(const std::vector<Observation>& stimuli, int layer) const {
  const Shape s = layer_shape(layer);
  Matrix out(static_cast<Eigen::Index>(stimuli.size()), s[0] * s[1] * s[2]);
  for (std::size_t i = 0; i < stimuli.size(); ++i) {
    const auto acts = forward(stimuli[i]);
    const auto& a = acts[layer];
    for (std::size_t j = 0; j < a.size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[j];
  }
  return out;
}

Matrix SurrogateCortex::respond(const std::vector<Observation>& stimuli) const {
  Matrix out(static_cast<Eigen::Index>(stimuli.size()), static_cast<Eigen::Index>(sites_.size()));
  for (std::size_t i = 0; i < stimuli.size(); ++i) {
    const auto acts = forward(stimuli[i]);
    Rng noise(derive_seed(seed_, kSeedCortex, 1 + i));
    for (std::size_t k = 0; k < sites_.size(); ++k) {
      const Site& s = sites_[k];
      const Shape& sh = shapes_[s.layer];
      const std::size_t idx = (static_cast<std::size_t>(s.y) * sh[1] + s.x) * sh[2] + s.channel;
      double v = acts[s.layer][idx];
      if (sigma_ > 0) v += sigma_ * noise.normal();
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v;
    }
  }
  return out;
}

}  // namespace vf

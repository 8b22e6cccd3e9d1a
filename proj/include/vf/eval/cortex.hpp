#pragma once

#include <cstdint>
#include <vector>

#include "vf/eval/alignment.hpp"
#include "vf/tensor/tensor.hpp"

namespace vf {

// Frozen random three-layer convolutional filter bank standing in for
// recorded neurons. Layers (valid padding, ReLU):
//   5x5 stride 2 -> 8 channels, 3x3 stride 2 -> 16, 3x3 stride 2 -> 8.
// Pixels are centred at 0.5 before the first layer. Each "neuron" is one
// (layer, y, x, channel) unit; sites are spread evenly over the layers and
// drawn without replacement. Weights ~ N(0, 2 / fan_in), biases zero.
class SurrogateCortex {
 public:
  struct Site {
    int layer, y, x, channel;
  };

  SurrogateCortex(int height, int width, std::uint64_t seed, int sites = 200, double sigma = 0.1);

  int height() const { return height_; }
  int width() const { return width_; }
  std::uint64_t seed() const { return seed_; }
  double sigma() const { return sigma_; }
  const std::vector<Site>& sites() const { return sites_; }
  Shape layer_shape(int layer) const;  // {h, w, c}
  static constexpr int kLayers = 3;

  // Every unit of one layer, flattened in HWC order: stimuli x units.
  Matrix layer_activations(const std::vector<Observation>& stimuli, int layer) const;

  // stimuli x sites. Noise for stimulus i comes from derive_seed(seed, Cortex, 1 + i).
  Matrix respond(const std::vector<Observation>& stimuli) const;

 private:
  std::vector<Tensor<float>> forward(const Observation& stimulus) const;

  int height_, width_;
  std::uint64_t seed_;
  double sigma_;
  std::vector<Tensor<float>> kernels_;
  std::vector<int> strides_;
  std::vector<Shape> shapes_;
  std::vector<Site> sites_;
};

}  // namespace vf

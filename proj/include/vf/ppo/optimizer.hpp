#pragma once

#include <cstdint>
#include <vector>

#include "vf/nn/model.hpp"

namespace vf {

// Adam with bias-corrected moments. State is sized lazily from the model's
// parameter list on the first step.
class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Model<float>& model, double lr);
  std::int64_t steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Scales every gradient so the global L2 norm is at most max_norm. Returns the
// norm before clipping.
double clip_grad_norm(Model<float>& model, double max_norm);

}  // namespace vf

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vf/core/rng.hpp"
#include "vf/tensor/tape.hpp"

namespace vf {

// A tensor whose gradient is verified. The forward callback must bind it with
// tape.parameter(*value, grad).
struct CheckedTensor {
  std::string name;
  Tensor<double>* value = nullptr;
  Tensor<double>* grad = nullptr;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;        // "name[index]" of the worst component
  std::size_t checked = 0;  // components compared
  std::string failure;      // set when an analytic gradient is non-finite

  bool passed(double tolerance) const { return failure.empty() && max_rel_error < tolerance; }
};

// Compares reverse-mode gradients of L = sum_i w_i * out_i (w fixed, drawn
// from rng) with central differences (L(x+d) - L(x-d)) / 2d. Relative error is
// |a - n| / max(|a|, |n|, 1e-5). max_coords limits how many components per
// tensor are probed (0 = all); probed components are drawn from rng.
GradCheckReport grad_check(const std::function<Var(GradTape<double>&)>& forward,
                           std::vector<CheckedTensor> tensors, double delta, Rng& rng,
                           std::size_t max_coords = 0);

}  // namespace vf

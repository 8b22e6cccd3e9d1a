#include "vf/tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vf {

namespace {

double weighted_loss(const Tensor<double>& out, const std::vector<double>& w) {
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) total += w[i] * out[i];
  return total;
}

}  // namespace

GradCheckReport grad_check(const std::function<Var(GradTape<double>&)>& forward,
                           std::vector<CheckedTensor> tensors, double delta, Rng& rng,
                           std::size_t max_coords) {
  if (delta < 1e-7 || delta > 1e-4) fail(ErrorKind::Config, "grad_check: delta must lie in [1e-7, 1e-4]");

  GradCheckReport report;
  for (auto& t : tensors) *t.grad = Tensor<double>(t.value->shape());

  std::vector<double> weights;
  {
    GradTape<double> tape;
    Var out = forward(tape);
    const Tensor<double>& y = tape.value(out);
    weights.resize(y.size());
    for (auto& w : weights) w = rng.uniform(-1.0, 1.0);
    Tensor<double> seed(y.shape(), std::vector<double>(weights));
    tape.backward(out, seed);
  }

  auto evaluate = [&]() {
    GradTape<double> tape;
    Var out = forward(tape);
    return weighted_loss(tape.value(out), weights);
  };

  for (auto& t : tensors) {
    for (std::size_t i = 0; i < t.grad->size(); ++i) {
      if (!std::isfinite((*t.grad)[i])) {
        report.failure = "non-finite analytic gradient for " + t.name + "[" + std::to_string(i) + "]";
        return report;
      }
    }
    std::vector<std::size_t> coords(t.value->size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (max_coords > 0 && coords.size() > max_coords) {
      for (std::size_t i = 0; i < max_coords; ++i) {
        std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
      }
      coords.resize(max_coords);
    }
    for (std::size_t idx : coords) {
      double& x = (*t.value)[idx];
      const double saved = x;
      x = saved + delta;
      const double up = evaluate();
      x = saved - delta;
      const double down = evaluate();
      x = saved;
      const double numeric = (up - down) / (2.0 * delta);
      const double analytic = (*t.grad)[idx];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-5});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error || report.worst.empty()) {
        if (rel >= report.max_rel_error) {
          report.max_rel_error = rel;
          report.worst = t.name + "[" + std::to_string(idx) + "]";
        }
      }
    }
  }
  return report;
}

}  // namespace vf

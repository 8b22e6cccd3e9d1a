#include "vf/ppo/optimizer.hpp"

#include <cmath>

namespace vf {

void Adam::step(Model<float>& model, double lr) {
  auto& params = model.parameters();
  if (m_.size() != params.size()) {
    m_.assign(params.size(), {});
    v_.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].value.size(), 0.0);
      v_[i].assign(params[i].value.size(), 0.0);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value.data();
    auto g = params[i].grad.data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k];
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * gk;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * gk * gk;
      const double update = lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
      w[k] = static_cast<float>(static_cast<double>(w[k]) - update);
    }
  }
}

double clip_grad_norm(Model<float>& model, double max_norm) {
  double sq = 0.0;
  for (const auto& p : model.parameters()) {
    for (float g : p.grad.data()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const float s = static_cast<float>(max_norm / norm);
    for (auto& p : model.parameters()) {
      for (float& g : p.grad.data()) g *= s;
    }
  }
  return norm;
}

}  // namespace vf

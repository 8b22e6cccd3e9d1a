#include "vf/ppo/buffer.hpp"

#include <algorithm>
#include <cmath>

#include "vf/core/error.hpp"

namespace vf {

RolloutBuffer::RolloutBuffer(int num_envs, int steps_per_env, int obs_size)
    : num_envs_(num_envs), steps_(steps_per_env), obs_size_(obs_size) {
  if (num_envs <= 0 || steps_per_env <= 0 || obs_size <= 0) {
    fail(ErrorKind::Config, "rollout buffer dimensions must be positive");
  }
  const auto n = static_cast<std::size_t>(capacity());
  observations_.resize(n * static_cast<std::size_t>(obs_size));
  actions_.resize(n);
  log_probs_.resize(n);
  values_.resize(n);
  rewards_.resize(n);
  advantages_.resize(n);
  returns_.resize(n);
  dones_.resize(n);
  written_.resize(n);
  bootstrap_.resize(static_cast<std::size_t>(num_envs));
}

void RolloutBuffer::store(int env, int t, std::span<const float> obs, const std::array<double, 3>& action,
                          double log_prob, double value, double reward, bool done) {
  if (env < 0 || env >= num_envs_ || t < 0 || t >= steps_) {
    fail(ErrorKind::Protocol, "rollout slot (" + std::to_string(env) + ", " + std::to_string(t) + ") out of range");
  }
  if (static_cast<int>(obs.size()) != obs_size_) {
    fail(ErrorKind::Dimension, "observation has " + std::to_string(obs.size()) + " values, buffer expects " +
                                   std::to_string(obs_size_));
  }
  const std::size_t i = slot(env, t);
  std::copy(obs.begin(), obs.end(), observations_.begin() + static_cast<std::ptrdiff_t>(i * obs_size_));
  actions_[i] = action;
  log_probs_[i] = log_prob;
  values_[i] = value;
  rewards_[i] = reward;
  dones_[i] = done ? 1 : 0;
  if (!written_[i]) {
    written_[i] = 1;
    ++filled_;
  }
}

void RolloutBuffer::set_bootstrap(int env, double value) { bootstrap_.at(static_cast<std::size_t>(env)) = value; }

void RolloutBuffer::clear() {
  filled_ = 0;
  std::fill(written_.begin(), written_.end(), 0);
}

void RolloutBuffer::compute_advantages(double gamma, double lambda, int horizon) {
  if (!full()) {
    fail(ErrorKind::Protocol, "advantages requested on a buffer holding " + std::to_string(filled_) + " of " +
                                  std::to_string(capacity()) + " transitions");
  }
  std::vector<double> next(static_cast<std::size_t>(steps_));
  for (int e = 0; e < num_envs_; ++e) {
    const std::size_t base = slot(e, 0);
    for (int t = 0; t + 1 < steps_; ++t) next[t] = values_[base + t + 1];
    next[steps_ - 1] = bootstrap_[e];
    const auto n = static_cast<std::size_t>(steps_);
    compute_gae(std::span(rewards_).subspan(base, n), std::span(values_).subspan(base, n), next,
                std::span(dones_).subspan(base, n), gamma, lambda, std::span(advantages_).subspan(base, n),
                std::span(returns_).subspan(base, n), horizon);
  }
}

void RolloutBuffer::normalize_advantages() {
  const double n = static_cast<double>(advantages_.size());
  double mean = 0.0;
  for (double a : advantages_) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : advantages_) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  if (sd == 0.0) return;
  for (double& a : advantages_) a = (a - mean) / sd;
}

void compute_gae(std::span<const double> rewards, std::span<const double> values,
                 std::span<const double> next_values, std::span<const unsigned char> dones, double gamma,
                 double lambda, std::span<double> advantages, std::span<double> returns, int horizon) {
  const std::size_t n = rewards.size();
  if (values.size() != n || next_values.size() != n || dones.size() != n || advantages.size() != n ||
      returns.size() != n) {
    fail(ErrorKind::Dimension, "compute_gae: sequence lengths differ");
  }
  double next_adv = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double live = dones[k] ? 0.0 : 1.0;
    const bool cut = horizon > 0 && (k + 1) % static_cast<std::size_t>(horizon) == 0;
    const double delta = rewards[k] + gamma * next_values[k] * live - values[k];
    const double carry = (k + 1 < n && !cut) ? next_adv : 0.0;
    advantages[k] = delta + gamma * lambda * live * carry;
    returns[k] = advantages[k] + values[k];
    next_adv = advantages[k];
  }
}

}  // namespace vf

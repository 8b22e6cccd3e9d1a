#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace vf {

// Fixed-capacity on-policy storage laid out [env][t]. Observations are stored
// exactly as the policy consumed them (normalised when the model normalises),
// so re-evaluating the unchanged policy reproduces the stored log-probs.
class RolloutBuffer {
 public:
  RolloutBuffer(int num_envs, int steps_per_env, int obs_size);

  int num_envs() const { return num_envs_; }
  int steps_per_env() const { return steps_; }
  int obs_size() const { return obs_size_; }
  int capacity() const { return num_envs_ * steps_; }
  int size() const { return filled_; }
  bool full() const { return filled_ == capacity(); }

  std::size_t slot(int env, int t) const { return static_cast<std::size_t>(env) * steps_ + t; }

  // Writes slot (env, t). Slots may be filled in any order; `size()` counts writes.
  void store(int env, int t, std::span<const float> obs, const std::array<double, 3>& action,
             double log_prob, double value, double reward, bool done);
  // V(s_{t+1}) for the final slot of each env (the state after the last stored transition).
  void set_bootstrap(int env, double value);
  void clear();

  // Fills advantages and returns. Recursion restarts every `horizon` steps
  // (0 = never), bootstrapping from the stored next-state value.
  void compute_advantages(double gamma, double lambda, int horizon = 0);
  // Mean 0, std 1 in place (no-op for std == 0).
  void normalize_advantages();

  std::span<const float> observation(std::size_t i) const {
    return {observations_.data() + i * static_cast<std::size_t>(obs_size_), static_cast<std::size_t>(obs_size_)};
  }
  const std::array<double, 3>& action(std::size_t i) const { return actions_[i]; }
  double log_prob(std::size_t i) const { return log_probs_[i]; }
  double value(std::size_t i) const { return values_[i]; }
  double reward(std::size_t i) const { return rewards_[i]; }
  bool done(std::size_t i) const { return dones_[i] != 0; }
  double advantage(std::size_t i) const { return advantages_[i]; }
  double ret(std::size_t i) const { return returns_[i]; }
  std::span<const double> advantages() const { return advantages_; }
  std::span<const double> returns() const { return returns_; }

 private:
  int num_envs_, steps_, obs_size_;
  int filled_ = 0;
  std::vector<float> observations_;
  std::vector<std::array<double, 3>> actions_;
  std::vector<double> log_probs_, values_, rewards_, advantages_, returns_, bootstrap_;
  std::vector<unsigned char> dones_, written_;
};

// One trajectory segment. next_values[t] = V(s_{t+1}); it is ignored where done[t].
//   delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
//   A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
//   R_t     = A_t + V(s_t)
// With horizon > 0 the A_{t+1} term is also dropped when (t + 1) % horizon == 0.
void compute_gae(std::span<const double> rewards, std::span<const double> values,
                 std::span<const double> next_values, std::span<const unsigned char> dones, double gamma,
                 double lambda, std::span<double> advantages, std::span<double> returns, int horizon = 0);

}  // namespace vf

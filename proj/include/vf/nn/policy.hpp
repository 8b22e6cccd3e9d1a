#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>

#include "vf/core/rng.hpp"

namespace vf {

// Diagonal Gaussian over the 3-D action with state-independent log-std.

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)

template <typename T>
double gaussian_log_prob(std::span<const T> mean, std::span<const T> log_std, std::span<const double> action) {
  double lp = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double sd = std::exp(static_cast<double>(log_std[i]));
    const double z = (action[i] - static_cast<double>(mean[i])) / sd;
    lp += -0.5 * z * z - static_cast<double>(log_std[i]) - kHalfLog2Pi;
  }
  return lp;
}

template <typename T>
double gaussian_entropy(std::span<const T> log_std) {
  double h = 0.0;
  for (T ls : log_std) h += 0.5 + kHalfLog2Pi + static_cast<double>(ls);
  return h;
}

struct PolicySample {
  std::array<double, 3> action{};
  double log_prob = 0.0;
  double value = 0.0;
};

// Samples mean + exp(log_std) * eps, or returns the mean when deterministic.
template <typename T>
PolicySample sample_policy(std::span<const T> mean, std::span<const T> log_std, T value, Rng& rng,
                           bool deterministic) {
  PolicySample s;
  for (std::size_t i = 0; i < 3; ++i) {
    const double m = static_cast<double>(mean[i]);
    s.action[i] = deterministic ? m : m + std::exp(static_cast<double>(log_std[i])) * rng.normal();
  }
  s.log_prob = gaussian_log_prob<T>(mean, log_std, s.action);
  s.value = static_cast<double>(value);
  return s;
}

}  // namespace vf

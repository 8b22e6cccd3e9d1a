#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace vf {

// All randomness in the project flows from one master seed. Child streams are
// obtained with derive_seed(parent, tag, index), which mixes the three words
// through SplitMix64. Tags in use:
//   kSeedInit      parameter initialisation
//   kSeedEnv       training environment i
//   kSeedEval      evaluation episode j
//   kSeedNoise     observation perturbation noise
//   kSeedShuffle   minibatch shuffling
//   kSeedPolicy    action sampling
//   kSeedDataset   alignment stimulus poses and split
//   kSeedCortex    surrogate cortex filters and response noise
enum SeedTag : std::uint64_t {
  kSeedInit = 1,
  kSeedEnv = 2,
  kSeedEval = 3,
  kSeedNoise = 4,
  kSeedShuffle = 5,
  kSeedPolicy = 6,
  kSeedDataset = 7,
  kSeedCortex = 8,
};

constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag,
                                    std::uint64_t index = 0) {
  std::uint64_t s = parent;
  std::uint64_t a = splitmix64(s);
  s = a ^ (tag * 0xD1B54A32D192ED03ull);
  std::uint64_t b = splitmix64(s);
  s = b ^ (index * 0x8CB92BA72F3D8DD7ull);
  return splitmix64(s);
}

// xoshiro256**. Uniform and normal variates are produced from raw bits with
// fixed arithmetic so streams are identical across standard libraries.
class Rng {
 public:
  using State = std::array<std::uint64_t, 4>;

  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  }

  // Box-Muller, no cached spare so the stream position is easy to reason about.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  const State& state() const { return state_; }
  void set_state(const State& s) { state_ = s; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  State state_{};
};

}  // namespace vf

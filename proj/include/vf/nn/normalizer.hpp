#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace vf {

// Per-channel running mean / standard deviation maintained by an exponential
// moving average over observation batches. The raw EMA accumulators start at
// zero and are bias-corrected by 1 - momentum^updates, so the first batch is
// already reflected at full weight.
class ObservationNormalizer {
 public:
  static constexpr double kEpsilon = 1e-8;

  explicit ObservationNormalizer(int channels = 1, double momentum = 0.999);

  // `values` holds any number of observations with channels interleaved
  // (channel = index % channels).
  void update(std::span<const float> values);

  // (x - mean) / (std + eps), channel = index % channels. Statistics are not touched.
  void apply(std::span<const float> in, std::span<float> out) const;

  std::vector<double> mean() const;
  std::vector<double> stddev() const;

  int channels() const { return static_cast<int>(raw_mean_.size()); }
  double momentum() const { return momentum_; }
  std::uint64_t updates() const { return updates_; }

  // Uncorrected EMA of the batch means (what a plain EMA starting at 0 holds).
  const std::vector<double>& raw_mean() const { return raw_mean_; }
  const std::vector<double>& raw_second_moment() const { return raw_sq_; }

  void restore(double momentum, std::uint64_t updates, std::vector<double> raw_mean,
               std::vector<double> raw_sq);

  friend bool operator==(const ObservationNormalizer&, const ObservationNormalizer&) = default;

 private:
  double correction() const;

  double momentum_;
  std::uint64_t updates_ = 0;
  std::vector<double> raw_mean_;
  std::vector<double> raw_sq_;
};

}  // namespace vf

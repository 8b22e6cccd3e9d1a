#include "vf/nn/normalizer.hpp"

#include <algorithm>
#include <cmath>

#include "vf/core/error.hpp"

namespace vf {

ObservationNormalizer::ObservationNormalizer(int channels, double momentum)
    : momentum_(momentum), raw_mean_(static_cast<std::size_t>(channels), 0.0),
      raw_sq_(static_cast<std::size_t>(channels), 0.0) {
  if (channels <= 0) fail(ErrorKind::Config, "normalizer needs at least one channel");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail(ErrorKind::Config, "normalizer momentum must lie in [0, 1)");
}

void ObservationNormalizer::update(std::span<const float> values) {
  const std::size_t c = raw_mean_.size();
  if (values.empty() || values.size() % c != 0) {
    fail(ErrorKind::Dimension, "normalizer update: batch length not a multiple of the channel count");
  }
  std::vector<double> sum(c, 0.0), sq(c, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    sum[i % c] += v;
    sq[i % c] += v * v;
  }
  const double per_channel = static_cast<double>(values.size() / c);
  for (std::size_t k = 0; k < c; ++k) {
    raw_mean_[k] = momentum_ * raw_mean_[k] + (1.0 - momentum_) * (sum[k] / per_channel);
    raw_sq_[k] = momentum_ * raw_sq_[k] + (1.0 - momentum_) * (sq[k] / per_channel);
  }
  ++updates_;
}

double ObservationNormalizer::correction() const {
  return 1.0 - std::pow(momentum_, static_cast<double>(updates_));
}

std::vector<double> ObservationNormalizer::mean() const {
  std::vector<double> m(raw_mean_.size(), 0.0);
  if (updates_ == 0) return m;
  const double corr = correction();
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = raw_mean_[k] / corr;
  return m;
}

std::vector<double> ObservationNormalizer::stddev() const {
  std::vector<double> s(raw_mean_.size(), 1.0);
  if (updates_ == 0) return s;
  const double corr = correction();
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double m = raw_mean_[k] / corr;
    s[k] = std::sqrt(std::max(raw_sq_[k] / corr - m * m, 0.0));
  }
  return s;
}

void ObservationNormalizer::apply(std::span<const float> in, std::span<float> out) const {
  const auto m = mean();
  const auto s = stddev();
  const std::size_t c = m.size();
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = static_cast<float>((in[i] - m[i % c]) / (s[i % c] + kEpsilon));
  }
}

void ObservationNormalizer::restore(double momentum, std::uint64_t updates, std::vector<double> raw_mean,
                                    std::vector<double> raw_sq) {
  if (raw_mean.size() != raw_sq.size() || raw_mean.empty()) {
    fail(ErrorKind::Data, "normalizer state has inconsistent channel counts");
  }
  momentum_ = momentum;
  updates_ = updates;
  raw_mean_ = std::move(raw_mean);
  raw_sq_ = std::move(raw_sq);
}

}  // namespace vf

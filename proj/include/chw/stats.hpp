#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "chw/parallel.hpp"

namespace chw {

inline constexpr double kZ95 = 1.959963984540054;

struct Estimate {
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double std_error = 0.0;
};

// Wilson score interval for a binomial proportion.
inline Estimate wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = kZ95) {
  Estimate e;
  if (trials == 0) return e;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  e.value = p;
  e.lower = std::max(0.0, center - half);
  e.upper = std::min(1.0, center + half);
  e.std_error = std::sqrt(p * (1.0 - p) / n);
  return e;
}

// Running first and second moments with compensated sums.
class MomentAccumulator {
 public:
  void add(double v) {
    sum_.add(v);
    sum_sq_.add(v * v);
    ++count_;
  }
  std::uint64_t count() const { return count_; }
  double mean() const { return count_ ? sum_.value() / static_cast<double>(count_) : 0.0; }
  double variance() const {
    if (count_ < 2) return 0.0;
    const double n = static_cast<double>(count_);
    const double m = mean();
    return std::max(0.0, (sum_sq_.value() - n * m * m) / (n - 1.0));
  }
  double std_error() const {
    return count_ ? std::sqrt(variance() / static_cast<double>(count_)) : 0.0;
  }
  // Normal-approximation 95% interval for the mean.
  Estimate estimate(double z = kZ95) const {
    const double se = std_error();
    return {mean(), mean() - z * se, mean() + z * se, se};
  }

 private:
  CompensatedSum sum_;
  CompensatedSum sum_sq_;
  std::uint64_t count_ = 0;
};

// Linear-interpolation quantile (type 7) of unsorted data.
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace chw

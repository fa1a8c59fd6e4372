#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "zerogen/vocabulary.hpp"

namespace zerogen {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// One score per vocabulary id. Once normalized the values are natural-log
// probabilities; masked entries are -inf.
class LogitVector {
 public:
  LogitVector() = default;
  explicit LogitVector(std::vector<double> values) : values_(std::move(values)) {}
  explicit LogitVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}

  static LogitVector from_probabilities(std::span<const double> probs) {
    std::vector<double> v(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) v[i] = probs[i] > 0 ? std::log(probs[i]) : kNegInf;
    return LogitVector(std::move(v));
  }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  std::vector<double>& mutable_values() noexcept { return values_; }

  // log-sum-exp of the entries; -inf when everything is masked.
  double log_partition() const {
    double hi = kNegInf;
    for (double v : values_) hi = std::max(hi, v);
    if (hi == kNegInf) return kNegInf;
    double s = 0.0;
    for (double v : values_) s += std::exp(v - hi);
    return hi + std::log(s);
  }

  // Shifts the entries so that exp(values) sums to 1. No-op when all masked.
  LogitVector normalized() const {
    const double z = log_partition();
    LogitVector out = *this;
    if (z == kNegInf) return out;
    for (double& v : out.values_) v -= z;
    return out;
  }

  // exp of the normalized entries.
  std::vector<double> probabilities() const {
    const double z = log_partition();
    std::vector<double> p(values_.size(), 0.0);
    if (z == kNegInf) return p;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(values_[i] - z);
    return p;
  }

  // Highest entry; ties go to the lowest id.
  TokenId argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values_.size(); ++i) {
      if (values_[i] > values_[best]) best = i;
    }
    return static_cast<TokenId>(best);
  }

  friend bool operator==(const LogitVector&, const LogitVector&) = default;

 private:
  std::vector<double> values_;
};

}  // namespace zerogen

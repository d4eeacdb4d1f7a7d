#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

namespace cutoff::numeric {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Neumaier variant of Kahan summation; order-deterministic.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double sum(std::span<const double> xs) noexcept;

// log(exp(a) + exp(b)) without overflow; -inf is the additive identity.
inline double log_add(double a, double b) noexcept {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

double log_sum_exp(std::span<const double> xs) noexcept;

inline double log_binomial(std::uint64_t n, std::uint64_t k) {
  return std::lgamma(double(n) + 1.0) - std::lgamma(double(k) + 1.0) -
         std::lgamma(double(n - k) + 1.0);
}

inline double logistic(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

double harmonic(std::uint64_t n) noexcept;

}  // namespace cutoff::numeric

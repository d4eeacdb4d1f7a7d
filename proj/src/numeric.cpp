#include "cutoff/numeric.hpp"

#include <algorithm>

namespace cutoff::numeric {

double sum(std::span<const double> xs) noexcept {
  CompensatedSum acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

double log_sum_exp(std::span<const double> xs) noexcept {
  if (xs.empty()) return kNegInf;
  const double top = *std::max_element(xs.begin(), xs.end());
  if (top == kNegInf) return kNegInf;
  CompensatedSum acc;
  for (double x : xs) acc.add(std::exp(x - top));
  return top + std::log(acc.value());
}

double harmonic(std::uint64_t n) noexcept {
  CompensatedSum acc;
  for (std::uint64_t k = n; k >= 1; --k) acc.add(1.0 / double(k));
  return acc.value();
}

}  // namespace cutoff::numeric

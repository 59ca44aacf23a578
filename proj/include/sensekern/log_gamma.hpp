#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace sensekern {

// log Γ(x) for x > 0. glibc's lgamma_r is accurate to a couple of ulp on
// [1, ∞) and, unlike std::lgamma, does not write the global signgam.
inline double log_gamma(double x) {
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

namespace detail {

inline constexpr std::size_t kLogFactorialTableSize = 4096;

inline const std::array<double, kLogFactorialTableSize>& log_factorial_table() {
  static const auto table = [] {
    std::array<double, kLogFactorialTableSize> t{};
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = log_gamma(static_cast<double>(k) + 1.0);
    return t;
  }();
  return table;
}

}  // namespace detail

// log k! = log Γ(k + 1); small arguments come from a table filled by log_gamma.
inline double log_factorial(std::uint64_t k) {
  if (k < detail::kLogFactorialTableSize) return detail::log_factorial_table()[k];
  return log_gamma(static_cast<double>(k) + 1.0);
}

}  // namespace sensekern

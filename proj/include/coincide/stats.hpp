#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "coincide/errors.hpp"

namespace coincide {

// Standard normal CDF via erfc; absolute error well below 1e-12 everywhere
// (glibc erfc is correctly rounded to a few ulps).
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

namespace poisson_detail {

// log of the Poisson pmf at k.
inline double log_pmf(std::uint64_t k, double mean) {
  return -mean + static_cast<double>(k) * std::log(mean) - std::lgamma(static_cast<double>(k) + 1.0);
}

// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace poisson_detail

// P(X <= m) for X ~ Poisson(mean), accumulated in log space so extreme
// means and tails stay finite.
inline double poisson_cdf(double mean, std::int64_t m) {
  if (mean < 0.0) throw DomainError("poisson_cdf: negative mean");
  if (m < 0) return 0.0;
  if (mean == 0.0) return 1.0;
  double log_sum = -mean;  // k = 0 term
  double log_term = -mean;
  const double lmean = std::log(mean);
  for (std::int64_t k = 1; k <= m; ++k) {
    log_term += lmean - std::log(static_cast<double>(k));
    log_sum = poisson_detail::log_add(log_sum, log_term);
    if (log_sum >= 0.0) return 1.0;                       // saturated
    if (k > mean && log_term < log_sum - 40.0) return std::min(1.0, std::exp(log_sum));
  }
  return std::min(1.0, std::exp(log_sum));
}

// P(X >= m), summed upward from m so small upper tails keep full precision.
inline double poisson_sf(double mean, std::int64_t m) {
  if (mean < 0.0) throw DomainError("poisson_sf: negative mean");
  if (m <= 0) return 1.0;
  if (mean == 0.0) return 0.0;
  if (static_cast<double>(m) <= mean) return 1.0 - poisson_cdf(mean, m - 1);
  double log_sum = poisson_detail::log_pmf(static_cast<std::uint64_t>(m), mean);
  double log_term = log_sum;
  const double lmean = std::log(mean);
  for (std::int64_t k = m + 1;; ++k) {
    log_term += lmean - std::log(static_cast<double>(k));
    log_sum = poisson_detail::log_add(log_sum, log_term);
    if (log_term < log_sum - 40.0) break;
  }
  return std::min(1.0, std::exp(log_sum));
}

// Smallest integer m with P(X <= m) >= x.
inline std::int64_t poisson_quantile(double x, double mean) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("poisson_quantile: x outside [0,1]");
  if (mean < 0.0) throw DomainError("poisson_quantile: negative mean");
  if (mean == 0.0 || x <= 0.0) return 0;
  if (x >= 1.0) throw DomainError("poisson_quantile: x = 1 has no finite quantile");
  // Running sum in log space; the scan is bounded far beyond the mean.
  double log_sum = -mean;
  double log_term = -mean;
  const double lmean = std::log(mean);
  const std::int64_t hard_cap =
      static_cast<std::int64_t>(mean + 12.0 * std::sqrt(mean) + 64.0) + 8;
  std::int64_t k = 0;
  while (!(log_sum >= std::log(x)) && k < hard_cap) {
    ++k;
    log_term += lmean - std::log(static_cast<double>(k));
    log_sum = poisson_detail::log_add(log_sum, log_term);
  }
  return k;
}

}  // namespace coincide

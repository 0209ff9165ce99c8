#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "pssim/random.hpp"

// Standard normal helpers for the truncated-normal (autonormal) model. Tail
// quantities are carried in log space through the complementary error
// function so that interval masses far from the mean do not underflow.
namespace pssim::normal {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

inline double pdf(double z) { return std::exp(-0.5 * z * z - kLogSqrt2Pi); }
inline double log_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }
inline double cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
inline double sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

// log(1 - Phi(z)).
inline double log_sf(double z) {
  if (z < 30.0) return std::log(sf(z));
  // Asymptotic Mills-ratio series; relative error < 1e-16 for z >= 30.
  const double r = 1.0 / (z * z);
  const double series = 1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
  return log_pdf(z) - std::log(z) + std::log(series);
}

inline double log_cdf(double z) { return log_sf(-z); }

// log(Phi(hi) - Phi(lo)), lo <= hi. Intervals entirely in one tail are
// evaluated from that tail.
inline double log_interval_mass(double lo, double hi) {
  if (!(hi > lo)) return -std::numeric_limits<double>::infinity();
  if (lo >= 0.0) {
    const double a = log_sf(lo);
    const double b = log_sf(hi);
    return a + std::log(-std::expm1(b - a));
  }
  if (hi <= 0.0) return log_interval_mass(-hi, -lo);
  return std::log(1.0 - sf(hi) - cdf(lo));
}

// Inverse of log_sf: the z with log(1 - Phi(z)) = log_q.
inline double sf_quantile_log(double log_q) {
  if (log_q >= std::log(0.5)) {
    const double p = -std::expm1(log_q);  // Phi(z), z <= 0
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
  }
  if (log_q > -700.0) return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * std::exp(log_q));
  if (!std::isfinite(log_q)) return std::numeric_limits<double>::infinity();
  // Far tail: Newton on log_sf, starting from the leading asymptotic term.
  double z = std::sqrt(-2.0 * log_q);
  for (int it = 0; it < 50; ++it) {
    const double f = log_sf(z) - log_q;
    // d/dz log_sf(z) = -pdf(z)/sf(z) ~ -(z + 1/z) in the tail.
    const double slope = -std::exp(log_pdf(z) - log_sf(z));
    const double step = f / slope;
    z -= step;
    if (std::abs(step) < 1e-14 * z) break;
  }
  return z;
}

// Draw a standard normal restricted to [lo, hi] by inverse CDF.
inline double sample_truncated_standard(double lo, double hi, Stream& rng) {
  if (!(hi > lo)) return lo;
  const double u = rng.uniform();
  if (lo >= 0.0) {
    const double a = log_sf(lo);
    const double b = log_sf(hi);
    // q = sf(lo) - u (sf(lo) - sf(hi))
    const double log_q = a + std::log1p(u * std::expm1(b - a));
    return std::clamp(sf_quantile_log(log_q), lo, hi);
  }
  if (hi <= 0.0) {
    const double a = log_sf(-hi);
    const double b = log_sf(-lo);
    const double log_q = a + std::log1p(u * std::expm1(b - a));
    return std::clamp(-sf_quantile_log(log_q), lo, hi);
  }
  const double p_lo = cdf(lo);
  const double p = p_lo + u * (cdf(hi) - p_lo);
  if (p <= 0.0) return lo;
  if (p >= 1.0) return hi;
  const double z = p < 0.5 ? -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p)
                           : std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * (1.0 - p));
  return std::clamp(z, lo, hi);
}

}  // namespace pssim::normal

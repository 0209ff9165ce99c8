#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

// Quadrature reference for the truncated-normal model on [0, 1].
namespace pssim::oracle {

inline double truncated_normal_density(double a, double mu, double sigma) {
  const double z = (a - mu) / sigma;
  const double norm = 0.5 * (std::erf((1.0 - mu) / (sigma * std::sqrt(2.0))) - std::erf(-mu / (sigma * std::sqrt(2.0))));
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * M_PI) * norm);
}

// Mean of N(mu, sigma^2) conditioned on [0, 1].
inline double truncated_normal_mean(double mu, double sigma) {
  const double lo = -mu / sigma, hi = (1.0 - mu) / sigma;
  const double phi_lo = std::exp(-0.5 * lo * lo) / std::sqrt(2.0 * M_PI);
  const double phi_hi = std::exp(-0.5 * hi * hi) / std::sqrt(2.0 * M_PI);
  const double z = 0.5 * (std::erf(hi / std::sqrt(2.0)) - std::erf(lo / std::sqrt(2.0)));
  return mu + sigma * (phi_lo - phi_hi) / z;
}

inline double truncated_normal_variance(double mu, double sigma) {
  const double lo = -mu / sigma, hi = (1.0 - mu) / sigma;
  const double phi_lo = std::exp(-0.5 * lo * lo) / std::sqrt(2.0 * M_PI);
  const double phi_hi = std::exp(-0.5 * hi * hi) / std::sqrt(2.0 * M_PI);
  const double z = 0.5 * (std::erf(hi / std::sqrt(2.0)) - std::erf(lo / std::sqrt(2.0)));
  const double r = (phi_lo - phi_hi) / z;
  return sigma * sigma * (1.0 + (lo * phi_lo - hi * phi_hi) / z - r * r);
}

// int_0^1 min(tn(a; mu1), tn(a; mu2)) da by adaptive Gauss-Kronrod, split at
// the crossing located by bracketing.
inline double overlap_quadrature(double mu1, double mu2, double sigma) {
  if (mu1 == mu2) return 1.0;
  auto f = [&](double a) {
    return std::min(truncated_normal_density(a, mu1, sigma), truncated_normal_density(a, mu2, sigma));
  };
  auto diff = [&](double a) {
    return std::log(truncated_normal_density(a, mu1, sigma)) - std::log(truncated_normal_density(a, mu2, sigma));
  };
  double split = 0.5;
  const double d0 = diff(0.0), d1 = diff(1.0);
  if (d0 * d1 < 0.0) {
    std::uintmax_t iters = 200;
    auto tol = boost::math::tools::eps_tolerance<double>(50);
    const auto r = boost::math::tools::toms748_solve(diff, 0.0, 1.0, d0, d1, tol, iters);
    split = 0.5 * (r.first + r.second);
  }
  using Gk = boost::math::quadrature::gauss_kronrod<double, 61>;
  return Gk::integrate(f, 0.0, split, 20, 1e-14) + Gk::integrate(f, split, 1.0, 20, 1e-14);
}

// Kernel given as (|x|, K(x)) for every offset with nonzero coupling.
struct AutonormalSpec {
  double sigma = 1.0;
  double field = 0.0;
  std::vector<std::pair<int, double>> couplings;
};

// alpha(k): infimum over the attainable seen mean of the overlap between the
// extreme completions, by a dense grid followed by Brent refinement.
inline double autonormal_alpha(const AutonormalSpec& spec, int k) {
  double seen_pos = 0.0, seen_neg = 0.0, unseen_pos = 0.0, unseen_neg = 0.0;
  for (const auto& [norm, v] : spec.couplings) {
    if (norm <= k) (v > 0 ? seen_pos : seen_neg) += std::abs(v);
    else (v > 0 ? unseen_pos : unseen_neg) += std::abs(v);
  }
  auto g = [&](double x) { return overlap_quadrature(x - unseen_neg, x + unseen_pos, spec.sigma); };
  const double lo = spec.field - seen_neg, hi = spec.field + seen_pos;
  if (!(hi > lo)) return g(lo);
  constexpr int kGrid = 400;
  int best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (int n = 0; n <= kGrid; ++n) {
    const double v = g(lo + (hi - lo) * n / kGrid);
    if (v < best_value) {
      best_value = v;
      best = n;
    }
  }
  const double a = lo + (hi - lo) * std::max(best - 1, 0) / kGrid;
  const double b = lo + (hi - lo) * std::min(best + 1, kGrid) / kGrid;
  const auto r = boost::math::tools::brent_find_minima(g, a, b, 40);
  return std::min(best_value, r.second);
}

}  // namespace pssim::oracle

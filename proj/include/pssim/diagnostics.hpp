#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pssim/decomposition.hpp"
#include "pssim/kernel.hpp"
#include "pssim/lattice.hpp"
#include "pssim/sketch.hpp"

namespace pssim {

// Closed-form bounds derived from gamma. Evaluators return nullopt when
// gamma >= 1 (no guarantee).
struct BoundsReport {
  double gamma = 0.0;
  bool subcritical = false;
  double mass_floor = 0.0;            // inf_i M_i
  std::vector<double> deficits;       // sup_i (M - alpha(L)) / M for L = -1..top
  bool exact_ladder = false;          // truncated kernel: deficits vanish from L on
  std::optional<double> beta_c;

  // P(N_STOP > N) <= |F| gamma^N
  std::optional<double> nstop_tail(std::size_t n, std::size_t window = 1) const {
    if (!subcritical) return std::nullopt;
    return static_cast<double>(window) * std::pow(gamma, static_cast<double>(n));
  }

  // |F| exp(-M (1 - gamma) t)
  std::optional<double> convergence(double t, std::size_t window = 1) const {
    if (!subcritical) return std::nullopt;
    return static_cast<double>(window) * std::exp(-mass_floor * (1.0 - gamma) * t);
  }

  // p / (1 - p) with p = |F| gamma^N
  std::optional<double> steps_bias(std::size_t n, std::size_t window = 1) const {
    if (!subcritical) return std::nullopt;
    return steps_bias_bound(gamma, n, window);
  }

  // sup_i (M - alpha(L)) / M / (1 - gamma)
  std::optional<double> range_bias(int L) const {
    if (!subcritical) return std::nullopt;
    if (L < -1) throw std::invalid_argument("range must be >= -1");
    const auto idx = static_cast<std::size_t>(L + 1);
    if (idx >= deficits.size()) {
      if (exact_ladder) return 0.0;
      return std::nullopt;
    }
    return deficits[idx] / (1.0 - gamma);
  }
};

// Solution of 2 beta sum_{k >= 1} |V(k)| sum_{|x| = k} K(x) = 1.
inline std::optional<double> beta_critical(const InteractionKernel& kernel) {
  const int d = kernel.dimension();
  double s = 0.0;
  if (auto range = kernel.range()) {
    for (int k = 1; k <= *range; ++k) s += static_cast<double>(ball_size(d, k)) * kernel.shell_absolute(k);
  } else {
    // Shells tabulated by the kernel, then terms until negligible; the
    // summand |V(k)| shell(k) is eventually geometric for decaying kernels.
    for (int k = 1; k < 100000; ++k) {
      const double shell = kernel.tail_absolute(k - 1) - kernel.tail_absolute(k);
      const double term = static_cast<double>(ball_size(d, k)) * shell;
      s += term;
      if (k > 8 && term < 1e-17 * s) break;
    }
  }
  if (!(s > 0.0) || !std::isfinite(s)) return std::nullopt;
  return 1.0 / (2.0 * s);
}

template <RateModel Model>
BoundsReport bounds_report(const KalikowDecomposition<Model>& decomp,
                           std::optional<double> beta_c = std::nullopt) {
  BoundsReport r;
  r.gamma = decomp.gamma();
  r.subcritical = r.gamma < 1.0;
  r.mass_floor = decomp.min_mass();
  r.exact_ladder = decomp.exact();
  for (int L = -1; L <= decomp.top(); ++L) r.deficits.push_back(decomp.deficit(L));
  r.beta_c = beta_c;
  return r;
}

// One row of the ladder table.
struct LadderRow {
  int k;
  double alpha;
  double lambda;
  double partial_sum;  // alpha(k) / M
  std::size_t ball_size;
  double gamma_contribution;
};

template <RateModel Model>
std::vector<LadderRow> ladder_rows(const KalikowDecomposition<Model>& decomp, const Site& site) {
  std::vector<LadderRow> rows;
  const double m = decomp.mass(site);
  for (int k = -1; k <= decomp.top(); ++k) {
    LadderRow row;
    row.k = k;
    row.alpha = decomp.alpha(site, k);
    row.lambda = decomp.lambda(site, k);
    row.partial_sum = row.alpha / m;
    row.ball_size = k < 0 ? 0 : ball_size(decomp.dimension(), k);
    row.gamma_contribution = k < 0 ? 0.0 : static_cast<double>(row.ball_size) * row.lambda;
    rows.push_back(row);
  }
  return rows;
}

// Statistic T on a window configuration (values in window order).
using SufficientStatistic = std::function<std::vector<double>(const std::vector<double>&)>;

struct PartitionRatio {
  double value = 0.0;      // d_n(theta)
  double log_value = 0.0;
  double se = 0.0;
};

inline double inner(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("parameter and statistic dimensions differ");
  double s = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) s += a[n] * b[n];
  return s;
}

// d_n(theta) = (1/n) sum_i exp <T(X_i), theta - psi>, accumulated in log
// space; se is the standard error of the plain sample mean.
inline PartitionRatio mc_partition_ratio(const std::vector<std::vector<double>>& samples,
                                         const SufficientStatistic& stat, const std::vector<double>& theta,
                                         const std::vector<double>& psi) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  if (theta.size() != psi.size()) throw std::invalid_argument("theta and psi dimensions differ");
  std::vector<double> diff(theta.size());
  for (std::size_t n = 0; n < theta.size(); ++n) diff[n] = theta[n] - psi[n];
  std::vector<double> ex;
  ex.reserve(samples.size());
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& x : samples) {
    ex.push_back(inner(stat(x), diff));
    top = std::max(top, ex.back());
  }
  double s1 = 0.0, s2 = 0.0;
  for (double e : ex) {
    const double v = std::exp(e - top);
    s1 += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(samples.size());
  PartitionRatio out;
  const double mean = s1 / n;
  out.log_value = top + std::log(mean);
  out.value = std::exp(out.log_value);
  const double var = samples.size() > 1 ? std::max(0.0, (s2 / n - mean * mean) * n / (n - 1.0)) : 0.0;
  out.se = std::exp(top) * std::sqrt(var / n);
  return out;
}

struct MleResult {
  std::vector<double> theta;
  double objective = 0.0;
};

// argmax over the grid of mean_x <T(x), theta> - log d_n(theta), with d_n
// from reference samples drawn at psi.
inline MleResult mle_grid(const std::vector<std::vector<double>>& observed,
                          const std::vector<std::vector<double>>& reference, const SufficientStatistic& stat,
                          const std::vector<double>& psi, const std::vector<std::vector<double>>& grid) {
  if (observed.empty() || grid.empty()) throw std::invalid_argument("empty observations or grid");
  std::vector<double> tbar;
  for (const auto& x : observed) {
    const auto t = stat(x);
    if (tbar.empty()) tbar.assign(t.size(), 0.0);
    for (std::size_t n = 0; n < t.size(); ++n) tbar[n] += t[n] / static_cast<double>(observed.size());
  }
  MleResult best{{}, -std::numeric_limits<double>::infinity()};
  for (const auto& theta : grid) {
    const double obj = inner(tbar, theta) - mc_partition_ratio(reference, stat, theta, psi).log_value;
    if (obj > best.objective) best = {theta, obj};
  }
  return best;
}

}  // namespace pssim

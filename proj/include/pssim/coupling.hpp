#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "pssim/assign.hpp"
#include "pssim/decomposition.hpp"
#include "pssim/error.hpp"
#include "pssim/kernel.hpp"
#include "pssim/lattice.hpp"
#include "pssim/models.hpp"
#include "pssim/parallel.hpp"
#include "pssim/random.hpp"
#include "pssim/state_space.hpp"

namespace pssim {

// Pair codes for ordered spin pairs (sigma, sigma~) with sigma <= sigma~.
namespace pair_code {
inline constexpr double both_minus = -1.0;  // (-1, -1)
inline constexpr double split = 0.0;        // (-1, +1)
inline constexpr double both_plus = 1.0;    // (+1, +1)

inline int lower(double code) { return code > 0.5 ? 1 : -1; }
inline int upper(double code) { return code < -0.5 ? -1 : 1; }
inline double encode(int lower, int upper) {
  if (lower > upper) throw std::invalid_argument("pair is not ordered");
  return lower < 0 ? (upper < 0 ? both_minus : split) : both_plus;
}
}  // namespace pair_code

struct SufficientCondition {
  bool pass = false;
  double slack = 0.0;  // (h~ - h) - sum_j (J~ - J)
  std::string reason;
};

// Checks J <= J~ entrywise, both ferromagnetic, h <= h~, and
// sum_j [J~(i,j) - J(i,j)] <= h~ - h.
inline SufficientCondition check_sufficient_condition(const InteractionKernel& lower, const InteractionKernel& upper,
                                                      double h, double h_upper) {
  SufficientCondition out;
  if (!lower.range() || !upper.range()) {
    out.reason = "coupled sampling needs truncated kernels";
    return out;
  }
  if (!lower.is_nonnegative() || !upper.is_nonnegative()) {
    out.reason = "kernels must be ferromagnetic";
    return out;
  }
  const int reach = std::max(*lower.range(), *upper.range());
  double gap = 0.0;
  for (const auto& o : ball_offsets(lower.dimension(), reach)) {
    const double diff = upper.coupling(o) - lower.coupling(o);
    if (diff < -1e-15) {
      out.reason = "J exceeds J~ at offset " + o.str();
      return out;
    }
    gap += diff;
  }
  if (h > h_upper) {
    out.reason = "h exceeds h~";
    return out;
  }
  out.slack = (h_upper - h) - gap;
  out.pass = out.slack >= -1e-12;
  if (!out.pass) out.reason = "coupling gap exceeds field gap";
  return out;
}

// Ordered-pair flip dynamics. Each marginal flips at rate
// exp(-beta sigma(i) [sum_j J(i,j) sigma(j) + h]); the pair state at i is
// replaced at rate M by (+,+) with probability p(+1 | sigma), by (-,-) with
// probability p~(-1 | sigma~), and by (-,+) otherwise. Rates are tabulated
// on V(L) and their infima by exhaustion of the ordered extensions.
class CoupledIsingModel {
 public:
  CoupledIsingModel(int d, double beta, InteractionKernel lower, InteractionKernel upper, double h, double h_upper)
      : space_(StateSpace::finite({pair_code::both_minus, pair_code::split, pair_code::both_plus})),
        lower_(std::move(lower)),
        upper_(std::move(upper)),
        beta_(beta),
        h_(h),
        h_upper_(h_upper),
        d_(d) {
    if (lower_.dimension() != d || upper_.dimension() != d) throw std::invalid_argument("kernel dimension mismatch");
    if (!(beta >= 0.0)) throw std::invalid_argument("beta must be >= 0");
    const auto cond = check_sufficient_condition(lower_, upper_, h, h_upper);
    if (!cond.pass) throw std::invalid_argument("coupled model rejected: " + cond.reason);
    range_ = std::max(*lower_.range(), *upper_.range());
    mass_ = 2.0 * std::exp(beta_ * (upper_.absolute_total() + h_upper_));
    build_tables();
  }

  int dimension() const { return d_; }
  const StateSpace& state_space() const { return space_; }
  int orbit(const Site&) const { return 0; }
  int orbit_count() const { return 1; }
  std::optional<int> interaction_range() const { return range_; }
  double mass_bound(const Site&) const { return mass_; }
  double beta() const { return beta_; }
  const InteractionKernel& lower_kernel() const { return lower_; }
  const InteractionKernel& upper_kernel() const { return upper_; }
  double lower_field() const { return h_; }
  double upper_field() const { return h_upper_; }

  // Update law (P(-,-), P(-,+), P(+,+)) at the centre of w, w the pair codes
  // on V(L) in ball order.
  std::array<double, 3> kernel(std::span<const double> w) const {
    const auto& offs = ball_offsets(d_, range_);
    if (w.size() != offs.size()) throw std::invalid_argument("pair configuration must cover V(L)");
    const auto& jl = lower_.ball_couplings(range_);
    const auto& ju = upper_.ball_couplings(range_);
    double field = h_, field_upper = h_upper_;
    int own_lower = 0, own_upper = 0;
    for (std::size_t n = 0; n < offs.size(); ++n) {
      const int sl = pair_code::lower(w[n]);
      const int su = pair_code::upper(w[n]);
      if (offs[n].l1_norm() == 0) {
        own_lower = sl;
        own_upper = su;
        continue;
      }
      field += jl[n] * sl;
      field_upper += ju[n] * su;
    }
    const double p_plus = plus_probability(own_lower, field);
    const double p_upper_minus = 1.0 - plus_probability(own_upper, field_upper);
    const double middle = 1.0 - p_plus - p_upper_minus;
    if (middle < -1e-12)
      throw InternalConsistencyError("coupled kernel has negative mass: domination violated");
    return {p_upper_minus, std::max(0.0, middle), p_plus};
  }

  double rate(const Site& i, SpinValue a, const SparseConfiguration& eta) const {
    std::vector<double> w;
    w.reserve(ball_size(d_, range_));
    for (const auto& o : ball_offsets(d_, range_)) {
      const auto v = eta.get(i + o);
      if (v.is_cemetery()) throw std::invalid_argument("pair configuration unassigned at " + (i + o).str());
      w.push_back(v.value());
    }
    if (a.is_cemetery()) return 0.0;
    return mass_ * kernel(w)[space_.index_of(a.value())];
  }

  double inf_rate(const Site&, int k, double a, std::span<const double> w) const {
    return entry(k, w)[space_.index_of(a)];
  }

  double inf_mass(const Site&, int k, std::span<const double> w) const {
    const auto& e = entry(k, w);
    return e[0] + e[1] + e[2];
  }

  double sup_mass(const Site&, int, std::span<const double>) const { return mass_; }

  double alpha(const Site&, int k) const {
    const auto kk = static_cast<std::size_t>(std::min(k, range_) + 1);
    return k >= range_ ? mass_ : alpha_[kk];
  }

  double deficit_bound(const Site&, int k) const { return k >= range_ ? 0.0 : 1.0; }

  double sample_inf_rate(const Site&, int k, std::span<const double> w, Stream& rng) const {
    const auto& e = entry(k, w);
    return space_.values()[static_cast<std::size_t>(detail::sample_discrete(e, e[0] + e[1] + e[2], rng))];
  }

 private:
  // Probability that the new spin is +1 for current own spin s and local
  // field H, with flip rate exp(-beta s H) and clock rate M.
  double plus_probability(int s, double field) const {
    const double flip = std::exp(-beta_ * s * field) / mass_;
    return s < 0 ? flip : 1.0 - flip;
  }

  static std::size_t digit(double code) { return code < -0.5 ? 0 : (code > 0.5 ? 2 : 1); }

  std::size_t index_of(int k, std::span<const double> w) const {
    if (k < 0) return 0;
    if (w.size() != ball_size(d_, k)) throw std::invalid_argument("local configuration size does not match V(k)");
    std::size_t idx = 0;
    for (std::size_t n = w.size(); n-- > 0;) idx = idx * 3 + digit(w[n]);
    return idx;
  }

  const std::array<double, 3>& entry(int k, std::span<const double> w) const {
    if (k > range_) {
      // Sites beyond the range do not matter.
      std::vector<double> inner;
      const auto& offs = ball_offsets(d_, k);
      for (std::size_t n = 0; n < offs.size(); ++n)
        if (offs[n].l1_norm() <= range_) inner.push_back(w[n]);
      return tables_[static_cast<std::size_t>(range_ + 1)][index_of(range_, inner)];
    }
    return tables_[static_cast<std::size_t>(k + 1)][index_of(k, w)];
  }

  void build_tables() {
    const std::size_t full = ball_size(d_, range_);
    std::size_t states = 1;
    for (std::size_t n = 0; n < full; ++n) {
      states *= 3;
      if (states > 10'000'000) throw std::invalid_argument("coupled model too large to tabulate");
    }
    tables_.assign(static_cast<std::size_t>(range_) + 2, {});
    auto& top = tables_.back();
    top.resize(states);
    std::vector<double> w(full);
    for (std::size_t idx = 0; idx < states; ++idx) {
      std::size_t rest = idx;
      for (std::size_t n = 0; n < full; ++n) {
        w[n] = space_.values()[rest % 3];
        rest /= 3;
      }
      const auto p = kernel(w);
      top[idx] = {mass_ * p[0], mass_ * p[1], mass_ * p[2]};
    }
    // c^[k] = min over the shell k+1 of c^[k+1].
    for (int k = range_ - 1; k >= -1; --k) {
      const auto& outer_offs = ball_offsets(d_, k + 1);
      const auto& outer = tables_[static_cast<std::size_t>(k + 2)];
      auto& inner = tables_[static_cast<std::size_t>(k + 1)];
      const std::size_t inner_states = k < 0 ? 1 : outer.size() / pow3(shell_size(d_, k + 1));
      inner.assign(inner_states, {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                                  std::numeric_limits<double>::infinity()});
      for (std::size_t idx = 0; idx < outer.size(); ++idx) {
        std::size_t rest = idx, inner_idx = 0, place = 1;
        for (std::size_t n = 0; n < outer_offs.size(); ++n) {
          const std::size_t dgt = rest % 3;
          rest /= 3;
          if (outer_offs[n].l1_norm() <= k) {
            inner_idx += dgt * place;
            place *= 3;
          }
        }
        for (int a = 0; a < 3; ++a) inner[inner_idx][a] = std::min(inner[inner_idx][a], outer[idx][a]);
      }
    }
    alpha_.clear();
    for (int k = -1; k <= range_; ++k) {
      double worst = std::numeric_limits<double>::infinity();
      for (const auto& e : tables_[static_cast<std::size_t>(k + 1)]) worst = std::min(worst, e[0] + e[1] + e[2]);
      alpha_.push_back(worst);
    }
  }

  static std::size_t pow3(std::size_t n) {
    std::size_t p = 1;
    while (n--) p *= 3;
    return p;
  }

  StateSpace space_;
  InteractionKernel lower_, upper_;
  double beta_, h_, h_upper_;
  int d_;
  int range_ = 0;
  double mass_ = 0.0;
  std::vector<std::vector<std::array<double, 3>>> tables_;  // index k + 1
  std::vector<double> alpha_;
};

struct DbarSite {
  Site site;
  double estimate = 0.0;  // disagreement frequency
  double ci_low = 0.0, ci_high = 0.0;
  double half_gap = 0.0;  // (mean sigma~ - mean sigma) / 2
};

struct DbarReport {
  std::vector<DbarSite> sites;
  DbarSite sup;
  std::size_t replicas = 0;
  std::size_t order_violations = 0;
};

// Wilson score interval at z = 1.96.
inline std::pair<double, double> wilson_interval(std::size_t hits, std::size_t n, double z = 1.96) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(hits) / nn;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * nn)) / (1 + z2 / nn);
  const double half = z * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn)) / (1 + z2 / nn);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

// Per-site disagreement frequencies of the ordered coupling over independent
// perfect samples of the pair chain; replica r uses the (seed, r) stream.
inline DbarReport estimate_dbar(const std::vector<Site>& query, const KalikowDecomposition<CoupledIsingModel>& decomp,
                                std::size_t replicas, std::uint64_t seed, const SamplerOptions& opts = {}) {
  auto samples = run_replicas<AssignmentResult>(replicas, [&](std::size_t r) {
    Stream rng = replica_stream(seed, r);
    return perfect_sample(query, decomp, rng, opts);
  });
  DbarReport out;
  out.replicas = replicas;
  std::vector<Site> sites;
  for (const auto& [s, v] : samples.empty() ? std::map<Site, SpinValue>{} : samples.front().spins) sites.push_back(s);
  for (const auto& s : sites) {
    std::size_t hits = 0;
    double gap = 0.0;
    for (const auto& smp : samples) {
      const double code = smp.value(s);
      const int lo = pair_code::lower(code), hi = pair_code::upper(code);
      if (lo > hi) ++out.order_violations;
      if (lo != hi) ++hits;
      gap += hi - lo;
    }
    DbarSite row;
    row.site = s;
    row.estimate = replicas ? static_cast<double>(hits) / static_cast<double>(replicas) : 0.0;
    std::tie(row.ci_low, row.ci_high) = wilson_interval(hits, replicas);
    row.half_gap = replicas ? gap / (2.0 * static_cast<double>(replicas)) : 0.0;
    if (out.sites.empty() || row.estimate > out.sup.estimate) out.sup = row;
    out.sites.push_back(row);
  }
  return out;
}

}  // namespace pssim

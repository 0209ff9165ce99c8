#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pssim/error.hpp"
#include "pssim/lattice.hpp"
#include "pssim/models.hpp"
#include "pssim/random.hpp"

namespace pssim {

inline constexpr int kDefaultRangeCap = 64;

// Convex decomposition of a rate model into finite-range pieces: the ladder
// alpha(k) (nondecreasing, capped by M), the range law lambda(k), and samplers
// for the layered densities p^[k](. | w).
//
// Ladders are computed per field orbit at construction, for k = -1..L on a
// truncated kernel and k = -1..range_cap otherwise.
template <RateModel Model>
class KalikowDecomposition {
 public:
  explicit KalikowDecomposition(Model model, int range_cap = kDefaultRangeCap)
      : model_(std::move(model)), d_(model_.dimension()) {
    if (range_cap < 0) throw std::invalid_argument("range cap must be non-negative");
    const auto range = model_.interaction_range();
    top_ = range ? *range : range_cap;
    finite_range_ = range.has_value();
    for (int o = 0; o < model_.orbit_count(); ++o) {
      const Site rep = orbit_representative(o);
      Ladder lad;
      lad.mass = model_.mass_bound(rep);
      if (!(lad.mass > 0.0) || !std::isfinite(lad.mass))
        throw std::invalid_argument("mass bound must be positive and finite");
      double prev = 0.0;
      for (int k = -1; k <= top_; ++k) {
        double a = (finite_range_ && k == top_) ? lad.mass : model_.alpha(rep, k);
        a = std::clamp(a, prev, lad.mass);
        lad.alpha.push_back(a);
        prev = a;
      }
      lad.gamma = ladder_gamma(rep, lad);
      ladders_.push_back(std::move(lad));
    }
  }

  const Model& model() const { return model_; }
  int dimension() const { return d_; }
  // Largest tabulated range: L for truncated kernels, the hard cap otherwise.
  int top() const { return top_; }
  bool exact() const { return finite_range_; }

  double mass(const Site& i) const { return ladder(i).mass; }
  double min_mass() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& l : ladders_) m = std::min(m, l.mass);
    return m;
  }

  double alpha(const Site& i, int k) const {
    if (k < -1) throw std::invalid_argument("range must be >= -1");
    const auto& lad = ladder(i);
    if (k > top_) {
      if (finite_range_) return lad.mass;
      throw RangeCapExceeded(top_, range_bias_at(top_));
    }
    return lad.alpha[static_cast<std::size_t>(k + 1)];
  }

  double lambda(const Site& i, int k) const {
    if (k < -1) throw std::invalid_argument("range must be >= -1");
    if (k > top_ && finite_range_) return 0.0;
    const double m = mass(i);
    if (k == -1) return alpha(i, -1) / m;
    return (alpha(i, k) - alpha(i, k - 1)) / m;
  }

  // sup over sites of sum_{k >= 0} |V(k)| lambda(k); +inf when the tail
  // beyond the cap cannot be certified.
  double gamma() const {
    double g = 0.0;
    for (const auto& l : ladders_) g = std::max(g, l.gamma);
    return g;
  }
  bool subcritical() const { return gamma() < 1.0; }

  // sup over sites of (M - alpha(L)) / M.
  double deficit(int L) const {
    if (L < -1) throw std::invalid_argument("range must be >= -1");
    if (finite_range_ && L >= top_) return 0.0;
    double worst = 0.0;
    for (int o = 0; o < static_cast<int>(ladders_.size()); ++o) {
      const auto& lad = ladders_[static_cast<std::size_t>(o)];
      double def;
      if (L <= top_)
        def = (lad.mass - lad.alpha[static_cast<std::size_t>(L + 1)]) / lad.mass;
      else
        def = model_.deficit_bound(orbit_representative(o), L);
      worst = std::max(worst, def);
    }
    return worst;
  }

  // Bound on the law error from never drawing ranges above L.
  double range_bias_at(int L) const {
    const double def = deficit(L);
    if (def == 0.0) return 0.0;
    const double g = gamma();
    return g < 1.0 ? def / (1.0 - g) : std::numeric_limits<double>::infinity();
  }

  // Inverse CDF of lambda: the smallest k with u M < alpha(k).
  int sample_range(const Site& i, double u) const {
    const auto& lad = ladder(i);
    const double target = u * lad.mass;
    auto it = std::upper_bound(lad.alpha.begin(), lad.alpha.end(), target);
    if (it == lad.alpha.end()) {
      if (finite_range_) return top_;
      throw RangeCapExceeded(top_, range_bias_at(top_));
    }
    return static_cast<int>(it - lad.alpha.begin()) - 1;
  }

  SpinValue sample_p_minus1(const Site& i, Stream& rng) const {
    if (!(alpha(i, -1) > 0.0)) throw SamplerError("p^[-1] undefined: lambda(-1) = 0");
    return SpinValue::real(model_.sample_inf_rate(i, -1, {}, rng));
  }

  // Draw from p^[k](. | w), w the values on V_i(k) in ball order.
  SpinValue sample_p_k(const Site& i, int k, std::span<const double> w, Stream& rng) const {
    if (k < 0) return sample_p_minus1(i, rng);
    const auto& lad = ladder(i);
    const double lo = alpha(i, k - 1), hi = alpha(i, k);
    if (!(hi > lo)) throw SamplerError("p^[" + std::to_string(k) + "] undefined: lambda(k) = 0");
    const Layers layers = config_ladder(i, k, w);
    const double u = rng.uniform();
    const double target = lo + (1.0 - u) * (hi - lo);  // in (lo, hi]
    int m = -1;
    while (m < k && !(target <= layers.alpha[static_cast<std::size_t>(m + 1)])) ++m;
    if (!(target <= layers.alpha[static_cast<std::size_t>(m + 1)])) {
      if (target > layers.alpha.back() + 1e-9 * lad.mass)
        throw InternalConsistencyError("configuration ladder does not cover alpha(" + std::to_string(k) + ")");
      m = k;
    }
    return sample_increment(i, m, layers, rng);
  }

  SpinValue sample_p_k(const Site& i, int k, const SparseConfiguration& sigma, Stream& rng) const {
    if (k < 0) return sample_p_minus1(i, rng);
    return sample_p_k(i, k, local_values(sigma, i, k), rng);
  }

  // Pointwise density of p^[k](a | w) times M lambda(k), with respect to
  // rho on A and the unit atom at the cemetery.
  double weighted_density(const Site& i, int k, SpinValue a, std::span<const double> w) const {
    if (k < 0) return local_inf_rate(model_, i, a, -1, std::span<const double>());
    const double lo = alpha(i, k - 1), hi = alpha(i, k);
    if (!(hi > lo)) return 0.0;
    const Layers layers = config_ladder(i, k, w);
    double total = 0.0;
    for (int m = -1; m <= k; ++m) {
      const double a0 = m < 0 ? 0.0 : layers.alpha[static_cast<std::size_t>(m)];
      const double a1 = layers.alpha[static_cast<std::size_t>(m + 1)];
      if (!(a1 > a0)) continue;
      const double overlap = std::min(hi, a1) - std::max(lo, a0);
      if (overlap <= 0.0) continue;
      total += overlap / (a1 - a0) * increment(i, m, a, layers);
    }
    return total;
  }

  double layered_density(const Site& i, int k, SpinValue a, std::span<const double> w) const {
    const double weight = mass(i) * lambda(i, k);
    if (!(weight > 0.0)) throw SamplerError("p^[" + std::to_string(k) + "] undefined: lambda(k) = 0");
    return weighted_density(i, k, a, w) / weight;
  }

  // M [lambda(-1) p^[-1](a) + sum_k lambda(k) p^[k](a | eta(V_i(k)))], over
  // the tabulated ranges.
  double reconstruct_rate(const Site& i, SpinValue a, const SparseConfiguration& eta) const {
    double total = weighted_density(i, -1, a, {});
    for (int k = 0; k <= top_; ++k) {
      if (!(lambda(i, k) > 0.0)) continue;
      const auto w = local_values(eta, i, k);
      total += weighted_density(i, k, a, w);
    }
    return total;
  }

  // alpha(l, w restricted to V_i(l)) for l = -1..k.
  std::vector<double> configuration_ladder(const Site& i, int k, std::span<const double> w) const {
    return config_ladder(i, k, w).alpha;
  }

 private:
  struct Ladder {
    double mass = 0.0;
    std::vector<double> alpha;  // index k + 1
    double gamma = 0.0;
  };

  struct Layers {
    std::vector<std::vector<double>> w;  // w restricted to V(l), l = 0..k
    std::vector<double> alpha;           // index l + 1, l = -1..k
  };

  Site orbit_representative(int o) const {
    Site s(d_);
    s[0] = o;
    return s;
  }

  const Ladder& ladder(const Site& i) const {
    if (i.dimension() != d_) throw std::invalid_argument("site dimension does not match the model");
    return ladders_[static_cast<std::size_t>(model_.orbit(i))];
  }

  static std::vector<double> local_values(const SparseConfiguration& sigma, const Site& i, int k) {
    std::vector<double> out;
    const auto& offs = ball_offsets(i.dimension(), k);
    out.reserve(offs.size());
    for (const auto& o : offs) {
      const auto v = sigma.get(i + o);
      if (v.is_cemetery())
        throw InternalConsistencyError("conditioning site " + (i + o).str() + " is unassigned while sampling at " +
                                       i.str());
      out.push_back(v.value());
    }
    return out;
  }

  double ladder_gamma(const Site& rep, const Ladder& lad) const {
    double g = 0.0;
    for (int k = 0; k <= top_; ++k) {
      const double lam = (lad.alpha[static_cast<std::size_t>(k + 1)] - lad.alpha[static_cast<std::size_t>(k)]) / lad.mass;
      g += static_cast<double>(ball_size(d_, k)) * lam;
    }
    if (finite_range_) return g;
    // Beyond the cap, with D(k) = (M - alpha(k))/M <= t(k):
    //   sum_{k>K} |V(k)| (D(k-1) - D(k)) = |V(K+1)| D(K) + sum_{k>K} shell(k+1) D(k).
    const double d_top = (lad.mass - lad.alpha.back()) / lad.mass;
    double tail = static_cast<double>(ball_size(d_, top_ + 1)) * d_top;
    for (int k = top_ + 1;; ++k) {
      const double term = static_cast<double>(shell_size(d_, k + 1)) * model_.deficit_bound(rep, k);
      tail += term;
      if (term < 1e-17 * std::max(tail, 1e-300) || term == 0.0) break;
      if (k > top_ + 100000) return std::numeric_limits<double>::infinity();
    }
    return g + tail;
  }

  Layers config_ladder(const Site& i, int k, std::span<const double> w) const {
    const auto& offs = ball_offsets(d_, k);
    if (w.size() != offs.size()) throw std::invalid_argument("local configuration size does not match V(k)");
    Layers out;
    out.w.resize(static_cast<std::size_t>(k) + 1);
    for (std::size_t n = 0; n < offs.size(); ++n) {
      const int norm = offs[n].l1_norm();
      for (int l = norm; l <= k; ++l) out.w[static_cast<std::size_t>(l)].push_back(w[n]);
    }
    const double m = mass(i);
    double prev = model_.inf_mass(i, -1, {});
    out.alpha.push_back(prev);
    for (int l = 0; l <= k; ++l) {
      const auto& wl = out.w[static_cast<std::size_t>(l)];
      double a = model_.inf_mass(i, l, wl) + m - model_.sup_mass(i, l, wl);
      a = std::max(a, prev);
      out.alpha.push_back(a);
      prev = a;
    }
    return out;
  }

  std::span<const double> layer_w(const Layers& layers, int l) const {
    if (l < 0) return {};
    return layers.w[static_cast<std::size_t>(l)];
  }

  // Delta^[m](a | w) = c^[m](a | w) - c^[m-1](a | w), with c^[-2] = 0.
  double increment(const Site& i, int m, SpinValue a, const Layers& layers) const {
    const double upper = local_inf_rate(model_, i, a, m, layer_w(layers, m));
    if (m < 0) return upper;
    const double lower = local_inf_rate(model_, i, a, m - 1, layer_w(layers, m - 1));
    return std::max(0.0, upper - lower);
  }

  SpinValue sample_increment(const Site& i, int m, const Layers& layers, Stream& rng) const {
    if (m < 0) return sample_p_minus1(i, rng);
    const auto wm = layer_w(layers, m);
    const auto wp = layer_w(layers, m - 1);
    const double cem = increment(i, m, SpinValue::cemetery(), layers);
    const double real = std::max(0.0, model_.inf_mass(i, m, wm) - model_.inf_mass(i, m - 1, wp));
    if (!(cem + real > 0.0)) throw InternalConsistencyError("selected layer carries no mass");
    if (rng.uniform() * (cem + real) < cem) return SpinValue::cemetery();
    const auto& space = model_.state_space();
    if (space.is_finite()) {
      std::vector<double> masses(space.size());
      double total = 0.0;
      for (std::size_t n = 0; n < masses.size(); ++n) {
        masses[n] = space.weights()[n] * increment(i, m, SpinValue::real(space.values()[n]), layers);
        total += masses[n];
      }
      if (!(total > 0.0)) throw InternalConsistencyError("selected layer has no real-valued mass");
      return SpinValue::real(space.values()[static_cast<std::size_t>(detail::sample_discrete(masses, total, rng))]);
    }
    // Propose from c^[m] and keep with probability 1 - c^[m-1]/c^[m].
    constexpr long kAttemptCap = 10'000'000;
    for (long attempt = 0; attempt < kAttemptCap; ++attempt) {
      const double x = model_.sample_inf_rate(i, m, wm, rng);
      const double top = model_.inf_rate(i, m, x, wm);
      const double below = model_.inf_rate(i, m - 1, x, wp);
      if (rng.uniform() * top >= below) return SpinValue::real(x);
    }
    throw SamplerError("rejection sampler for layer " + std::to_string(m) + " exceeded " +
                       std::to_string(kAttemptCap) + " attempts");
  }

  Model model_;
  int d_;
  int top_ = 0;
  bool finite_range_ = false;
  std::vector<Ladder> ladders_;
};

}  // namespace pssim

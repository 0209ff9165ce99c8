#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pssim/kernel.hpp"
#include "pssim/lattice.hpp"
#include "pssim/normal.hpp"
#include "pssim/random.hpp"
#include "pssim/state_space.hpp"

namespace pssim {

// Rate family c_i(a, eta) together with everything the convex decomposition
// needs from it. Local configurations `w` are spans aligned with
// ball_offsets(d, k) around the site; k = -1 means no conditioning (w empty).
//
//   inf_rate(i, k, a, w)   c^[k](a | w) = inf over eta agreeing with w on V_i(k)
//   inf_mass(i, k, w)      integral over A of c^[k](. | w)
//   sup_mass(i, k, w)      sup over eta agreeing with w of integral over A of c
//   alpha(i, k)            inf over w of inf_mass + M - sup_mass
//   deficit_bound(i, k)    an upper bound on (M - alpha(k)) / M
//   sample_inf_rate        exact draw from the density proportional to c^[k](. | w)
template <class M>
concept RateModel = requires(const M& m, const Site& i, int k, double a, std::span<const double> w,
                             const SparseConfiguration& eta, SpinValue v, Stream& rng) {
  { m.dimension() } -> std::convertible_to<int>;
  { m.state_space() } -> std::same_as<const StateSpace&>;
  { m.orbit(i) } -> std::convertible_to<int>;
  { m.orbit_count() } -> std::convertible_to<int>;
  { m.interaction_range() } -> std::same_as<std::optional<int>>;
  { m.mass_bound(i) } -> std::convertible_to<double>;
  { m.rate(i, v, eta) } -> std::convertible_to<double>;
  { m.inf_rate(i, k, a, w) } -> std::convertible_to<double>;
  { m.inf_mass(i, k, w) } -> std::convertible_to<double>;
  { m.sup_mass(i, k, w) } -> std::convertible_to<double>;
  { m.alpha(i, k) } -> std::convertible_to<double>;
  { m.deficit_bound(i, k) } -> std::convertible_to<double>;
  { m.sample_inf_rate(i, k, w, rng) } -> std::convertible_to<double>;
};

// Bounded external field h_i: constant, or alternating on the two parity
// classes of Z^d. The parity class is the site's orbit.
class FieldFamily {
 public:
  static FieldFamily constant(double h) { return FieldFamily(h, h, false); }
  static FieldFamily alternating(double even, double odd) { return FieldFamily(even, odd, true); }

  double at(const Site& i) const { return alternating_ && i.parity() ? odd_ : even_; }
  int orbit(const Site& i) const { return alternating_ ? i.parity() : 0; }
  int orbit_count() const { return alternating_ ? 2 : 1; }
  double for_orbit(int o) const { return o ? odd_ : even_; }
  double min() const { return std::min(even_, odd_); }
  double max() const { return std::max(even_, odd_); }
  bool is_alternating() const { return alternating_; }

 private:
  FieldFamily(double even, double odd, bool alternating)
      : even_(even), odd_(odd), alternating_(alternating) {
    if (!std::isfinite(even) || !std::isfinite(odd)) throw std::invalid_argument("field must be finite");
  }
  double even_, odd_;
  bool alternating_;
};

// Real values of `config` on V_center(k) in ball order; throws if any site
// needed reads as cemetery.
inline std::vector<double> gather_local(const SparseConfiguration& config, const Site& center, int k) {
  std::vector<double> out;
  if (k < 0) return out;
  const auto& offs = ball_offsets(center.dimension(), k);
  out.reserve(offs.size());
  for (const auto& o : offs) {
    const auto v = config.get(center + o);
    if (v.is_cemetery())
      throw std::invalid_argument("configuration unassigned at " + (center + o).str());
    out.push_back(v.value());
  }
  return out;
}

inline std::vector<double> gather_local(const LocalConfiguration& local, const Site& center, int k) {
  std::vector<double> out;
  if (k < 0) return out;
  for (const auto& o : ball_offsets(center.dimension(), k)) {
    auto it = local.find(center + o);
    if (it == local.end() || it->second.is_cemetery())
      throw std::invalid_argument("local configuration does not assign " + (center + o).str());
    out.push_back(it->second.value());
  }
  return out;
}

namespace detail {

// sum_j K(j - i) eta(j) for a kernel, with the infinite-range remainder taken
// from the configuration's real default.
inline double interaction_sum(const InteractionKernel& kernel, const Site& i, const SparseConfiguration& eta) {
  const int d = kernel.dimension();
  if (auto range = kernel.range()) {
    double s = 0.0;
    const auto& offs = ball_offsets(d, *range);
    const auto& js = kernel.ball_couplings(*range);
    for (std::size_t n = 0; n < offs.size(); ++n) {
      if (js[n] == 0.0) continue;
      const auto v = eta.get(i + offs[n]);
      if (v.is_cemetery())
        throw std::invalid_argument("configuration insufficiently specified at " + (i + offs[n]).str());
      s += js[n] * v.value();
    }
    return s;
  }
  const auto fallback = eta.fallback();
  if (fallback.is_cemetery())
    throw std::invalid_argument("infinite-range kernel needs a configuration with a real default");
  double s = fallback.value() * kernel.signed_total();
  for (const auto& [j, v] : eta.assignments()) {
    if (j == i) continue;
    s += kernel.coupling(j - i) * (v.value() - fallback.value());
  }
  return s;
}

// int_{a0}^{a1} e^{s a} da
inline double exp_integral(double s, double a0, double a1) {
  const double len = a1 - a0;
  if (!(len > 0.0)) return 0.0;
  const double sl = s * len;
  if (std::abs(sl) < 1e-10) return len * std::exp(s * a0) * (1.0 + 0.5 * sl);
  return std::exp(s * a0) * std::expm1(sl) / s;
}

// Inverse-CDF draw from the density proportional to e^{s a} on [a0, a1].
inline double sample_exp_interval(double s, double a0, double a1, Stream& rng) {
  const double len = a1 - a0;
  const double u = rng.uniform();
  if (std::abs(s * len) < 1e-12) return a0 + u * len;
  double a;
  if (s > 0.0)
    a = a1 + std::log(u + (1.0 - u) * std::exp(-s * len)) / s;
  else
    a = a0 + std::log((1.0 - u) + u * std::exp(s * len)) / s;
  return std::clamp(a, a0, a1);
}

inline double sample_discrete(std::span<const double> masses, double total, Stream& rng) {
  double u = rng.uniform() * total;
  std::size_t last = 0;
  for (std::size_t n = 0; n < masses.size(); ++n) {
    if (masses[n] <= 0.0) continue;
    last = n;
    if (u < masses[n]) return static_cast<double>(n);
    u -= masses[n];
  }
  return static_cast<double>(last);
}

}  // namespace detail

// c_i(a, eta) = exp(beta a (h_i + sum_j J(i,j) eta(j))) on a finite A with
// atom weights ("ising") or on an interval with constant density
// ("gibbs-cont").
class ExponentialModel {
 public:
  ExponentialModel(StateSpace space, InteractionKernel kernel, double beta,
                   FieldFamily field = FieldFamily::constant(0.0))
      : space_(std::move(space)), kernel_(std::move(kernel)), beta_(beta), field_(field) {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be finite and >= 0");
    a_min_ = space_.lower();
    a_max_ = space_.upper();
    for (int o = 0; o < field_.orbit_count(); ++o) {
      const double h = field_.for_orbit(o);
      mass_.push_back(std::max(total_integral(h + unseen_low(-1)), total_integral(h + unseen_high(-1))));
    }
  }

  static ExponentialModel ising(int d, double beta, InteractionKernel kernel,
                                FieldFamily field = FieldFamily::constant(0.0)) {
    if (kernel.dimension() != d) throw std::invalid_argument("kernel dimension mismatch");
    return ExponentialModel(StateSpace::finite({-1.0, 1.0}), std::move(kernel), beta, field);
  }

  static ExponentialModel gibbs_continuous(int d, double beta, InteractionKernel kernel, double density = 1.0) {
    if (kernel.dimension() != d) throw std::invalid_argument("kernel dimension mismatch");
    return ExponentialModel(StateSpace::interval(-1.0, 1.0, density), std::move(kernel), beta);
  }

  int dimension() const { return kernel_.dimension(); }
  const StateSpace& state_space() const { return space_; }
  const InteractionKernel& kernel() const { return kernel_; }
  const FieldFamily& field() const { return field_; }
  double beta() const { return beta_; }
  int orbit(const Site& i) const { return field_.orbit(i); }
  int orbit_count() const { return field_.orbit_count(); }
  std::optional<int> interaction_range() const { return kernel_.range(); }

  double mass_bound(const Site& i) const { return mass_[static_cast<std::size_t>(orbit(i))]; }

  double rate(const Site& i, SpinValue a, const SparseConfiguration& eta) const {
    const double local_field = field_.at(i) + detail::interaction_sum(kernel_, i, eta);
    if (a.is_cemetery()) return std::max(0.0, mass_bound(i) - total_integral(local_field));
    check_value(a.value());
    return std::exp(beta_ * a.value() * local_field);
  }

  double inf_rate(const Site& i, int k, double a, std::span<const double> w) const {
    const double x = seen_field(i, k, w);
    if (a == 0.0) return 1.0;
    return std::exp(beta_ * a * (x + (a > 0.0 ? unseen_low(k) : unseen_high(k))));
  }

  double inf_mass(const Site& i, int k, std::span<const double> w) const {
    return inf_mass_at(k, seen_field(i, k, w));
  }

  double sup_mass(const Site& i, int k, std::span<const double> w) const {
    return sup_mass_at(k, seen_field(i, k, w));
  }

  // The mass integral + M - sup is quasi-concave in the seen field, so its
  // infimum over w sits at one of the two extreme attainable fields.
  double alpha(const Site& i, int k) const {
    const double m = mass_bound(i);
    const double h = field_.at(i);
    if (k < 0) return inf_mass_at(-1, h);
    if (kernel_.range() && k >= *kernel_.range()) return m;
    const double lo = h + a_min_ * kernel_.partial_positive(k) - a_max_ * kernel_.partial_negative(k);
    const double hi = h + a_max_ * kernel_.partial_positive(k) - a_min_ * kernel_.partial_negative(k);
    const double g_lo = inf_mass_at(k, lo) + m - sup_mass_at(k, lo);
    const double g_hi = inf_mass_at(k, hi) + m - sup_mass_at(k, hi);
    return std::clamp(std::min(g_lo, g_hi), 0.0, m);
  }

  double deficit_bound(const Site&, int k) const {
    if (kernel_.range() && k >= *kernel_.range()) return 0.0;
    const double abar = std::max(std::abs(a_min_), std::abs(a_max_));
    return std::min(1.0, std::expm1(beta_ * abar * (unseen_high(k) - unseen_low(k))));
  }

  double sample_inf_rate(const Site& i, int k, std::span<const double> w, Stream& rng) const {
    const double x = seen_field(i, k, w);
    const double y_neg = x + unseen_high(k);
    const double y_pos = x + unseen_low(k);
    if (space_.is_finite()) {
      std::vector<double> masses(space_.size());
      double total = 0.0;
      for (std::size_t n = 0; n < masses.size(); ++n) {
        const double a = space_.values()[n];
        masses[n] = space_.weights()[n] * (a == 0.0 ? 1.0 : std::exp(beta_ * a * (a > 0 ? y_pos : y_neg)));
        total += masses[n];
      }
      return space_.values()[static_cast<std::size_t>(detail::sample_discrete(masses, total, rng))];
    }
    const double neg = part_integral(y_neg, Part::negative);
    const double pos = part_integral(y_pos, Part::positive);
    if (rng.uniform() * (neg + pos) < neg)
      return detail::sample_exp_interval(beta_ * y_neg, a_min_, std::min(a_max_, 0.0), rng);
    return detail::sample_exp_interval(beta_ * y_pos, std::max(a_min_, 0.0), a_max_, rng);
  }

  // Range of sum over |j - i| > k of J(i,j) eta(j) as eta varies in A.
  double unseen_low(int k) const {
    return a_min_ * kernel_.tail_positive(k) - a_max_ * kernel_.tail_negative(k);
  }
  double unseen_high(int k) const {
    return a_max_ * kernel_.tail_positive(k) - a_min_ * kernel_.tail_negative(k);
  }

  // h_i + sum over 0 < |j - i| <= k of J(i,j) w(j).
  double seen_field(const Site& i, int k, std::span<const double> w) const {
    double x = field_.at(i);
    if (k < 0) return x;
    const auto& js = kernel_.ball_couplings(k);
    if (w.size() != js.size()) throw std::invalid_argument("local configuration size does not match V(k)");
    for (std::size_t n = 0; n < js.size(); ++n) x += js[n] * w[n];
    return x;
  }

  // Z(y) = int_A e^{beta a y} rho(da)
  double total_integral(double y) const {
    return part_integral(y, Part::negative) + part_integral(y, Part::zero) + part_integral(y, Part::positive);
  }

 private:
  enum class Part { negative, zero, positive };

  double part_integral(double y, Part part) const {
    if (space_.is_finite()) {
      double s = 0.0;
      for (std::size_t n = 0; n < space_.size(); ++n) {
        const double a = space_.values()[n];
        const bool in = part == Part::negative ? a < 0.0 : part == Part::positive ? a > 0.0 : a == 0.0;
        if (in) s += space_.weights()[n] * std::exp(beta_ * a * y);
      }
      return s;
    }
    const double rho = space_.density();
    switch (part) {
      case Part::negative:
        return a_min_ < 0.0 ? rho * detail::exp_integral(beta_ * y, a_min_, std::min(a_max_, 0.0)) : 0.0;
      case Part::positive:
        return a_max_ > 0.0 ? rho * detail::exp_integral(beta_ * y, std::max(a_min_, 0.0), a_max_) : 0.0;
      case Part::zero:
        return 0.0;
    }
    return 0.0;
  }

  double inf_mass_at(int k, double x) const {
    return part_integral(x + unseen_high(k), Part::negative) + part_integral(x, Part::zero) +
           part_integral(x + unseen_low(k), Part::positive);
  }

  double sup_mass_at(int k, double x) const {
    return std::max(total_integral(x + unseen_low(k)), total_integral(x + unseen_high(k)));
  }

  void check_value(double a) const {
    if (!space_.contains(a)) throw std::invalid_argument("spin value " + std::to_string(a) + " outside A");
  }

  StateSpace space_;
  InteractionKernel kernel_;
  double beta_;
  FieldFamily field_;
  double a_min_ = 0.0, a_max_ = 0.0;
  std::vector<double> mass_;
};

// Truncated-normal heat bath on A = [0, 1]: the new value at i is normal with
// mean h_i + sum_j J(i,j) eta(j) and standard deviation sigma, conditioned on
// [0, 1]. The rate is that density, so M_i = 1 and the cemetery never fires.
class AutonormalModel {
 public:
  AutonormalModel(InteractionKernel kernel, double sigma, FieldFamily field = FieldFamily::constant(0.0))
      : space_(StateSpace::interval(0.0, 1.0)), kernel_(std::move(kernel)), sigma_(sigma), field_(field) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be positive");
  }

  int dimension() const { return kernel_.dimension(); }
  const StateSpace& state_space() const { return space_; }
  const InteractionKernel& kernel() const { return kernel_; }
  const FieldFamily& field() const { return field_; }
  double sigma() const { return sigma_; }
  int orbit(const Site& i) const { return field_.orbit(i); }
  int orbit_count() const { return field_.orbit_count(); }
  std::optional<int> interaction_range() const { return kernel_.range(); }

  double mass_bound(const Site&) const { return 1.0; }

  double rate(const Site& i, SpinValue a, const SparseConfiguration& eta) const {
    const double mean = field_.at(i) + detail::interaction_sum(kernel_, i, eta);
    if (a.is_cemetery()) return 0.0;
    if (!space_.contains(a.value()))
      throw std::invalid_argument("spin value " + std::to_string(a.value()) + " outside [0,1]");
    return density(a.value(), mean);
  }

  double inf_rate(const Site& i, int k, double a, std::span<const double> w) const {
    const double x = seen_field(i, k, w);
    return std::min(density(a, x + unseen_low(k)), density(a, x + unseen_high(k)));
  }

  double inf_mass(const Site& i, int k, std::span<const double> w) const {
    const double x = seen_field(i, k, w);
    return overlap(x + unseen_low(k), x + unseen_high(k));
  }

  double sup_mass(const Site&, int, std::span<const double>) const { return 1.0; }

  // The conditioning enters only through the seen mean x; the infimum of
  // the overlap over x in its attainable interval is found by a grid scan
  // refined with golden-section search.
  double alpha(const Site& i, int k) const {
    const double h = field_.at(i);
    if (k < 0) return overlap(h + unseen_low(-1), h + unseen_high(-1));
    if (kernel_.range() && k >= *kernel_.range()) return 1.0;
    const double lo = h - kernel_.partial_negative(k);
    const double hi = h + kernel_.partial_positive(k);
    const double dl = unseen_low(k), dh = unseen_high(k);
    auto g = [&](double x) { return overlap(x + dl, x + dh); };
    return std::clamp(minimize(g, lo, hi), 0.0, 1.0);
  }

  // Densities at neighbouring means differ by at most a factor e^{dmu/sigma^2}
  // on [0,1], so the overlap is at least e^{-(spread)/sigma^2}.
  double deficit_bound(const Site&, int k) const {
    if (kernel_.range() && k >= *kernel_.range()) return 0.0;
    return -std::expm1(-(unseen_high(k) - unseen_low(k)) / (sigma_ * sigma_));
  }

  double sample_inf_rate(const Site& i, int k, std::span<const double> w, Stream& rng) const {
    const double x = seen_field(i, k, w);
    const double mu_lo = x + unseen_low(k);
    const double mu_hi = x + unseen_high(k);
    if (mu_hi - mu_lo <= 0.0) return sample_piece(mu_lo, 0.0, 1.0, rng);
    const Pieces p = pieces(mu_lo, mu_hi);
    if (rng.uniform() * (p.left + p.right) < p.left) return sample_piece(mu_hi, 0.0, p.cross, rng);
    return sample_piece(mu_lo, p.cross, 1.0, rng);
  }

  double unseen_low(int k) const { return -kernel_.tail_negative(k); }
  double unseen_high(int k) const { return kernel_.tail_positive(k); }

  double seen_field(const Site& i, int k, std::span<const double> w) const {
    double x = field_.at(i);
    if (k < 0) return x;
    const auto& js = kernel_.ball_couplings(k);
    if (w.size() != js.size()) throw std::invalid_argument("local configuration size does not match V(k)");
    for (std::size_t n = 0; n < js.size(); ++n) x += js[n] * w[n];
    return x;
  }

  // log of the normalizer Phi((1-mu)/s) - Phi(-mu/s)
  double log_normalizer(double mean) const {
    return normal::log_interval_mass(-mean / sigma_, (1.0 - mean) / sigma_);
  }

  double density(double a, double mean) const {
    return std::exp(normal::log_pdf((a - mean) / sigma_) - std::log(sigma_) - log_normalizer(mean));
  }

  // Point where the densities at means mu_lo < mu_hi cross, clamped to [0,1].
  double crossing(double mu_lo, double mu_hi) const {
    const double x = 0.5 * (mu_lo + mu_hi) -
                     sigma_ * sigma_ / (mu_hi - mu_lo) * (log_normalizer(mu_lo) - log_normalizer(mu_hi));
    return std::clamp(x, 0.0, 1.0);
  }

  // int_0^1 min(tn(a; mu_lo), tn(a; mu_hi)) da
  double overlap(double mu_lo, double mu_hi) const {
    if (!(mu_hi - mu_lo > 0.0)) return 1.0;
    const Pieces p = pieces(mu_lo, mu_hi);
    return p.left + p.right;
  }

 private:
  struct Pieces {
    double cross;
    double left;   // mass of tn(mu_hi) on [0, cross]
    double right;  // mass of tn(mu_lo) on [cross, 1]
  };

  Pieces pieces(double mu_lo, double mu_hi) const {
    const double x = crossing(mu_lo, mu_hi);
    Pieces p{x, 0.0, 0.0};
    if (x > 0.0)
      p.left = std::exp(normal::log_interval_mass(-mu_hi / sigma_, (x - mu_hi) / sigma_) - log_normalizer(mu_hi));
    if (x < 1.0)
      p.right =
          std::exp(normal::log_interval_mass((x - mu_lo) / sigma_, (1.0 - mu_lo) / sigma_) - log_normalizer(mu_lo));
    return p;
  }

  double sample_piece(double mean, double lo, double hi, Stream& rng) const {
    const double z = normal::sample_truncated_standard((lo - mean) / sigma_, (hi - mean) / sigma_, rng);
    return std::clamp(mean + sigma_ * z, lo, hi);
  }

  template <class F>
  static double minimize(F&& g, double lo, double hi) {
    if (!(hi > lo)) return g(lo);
    constexpr int kGrid = 64;
    int best = 0;
    double best_value = std::numeric_limits<double>::infinity();
    for (int n = 0; n <= kGrid; ++n) {
      const double v = g(lo + (hi - lo) * n / kGrid);
      if (v < best_value) {
        best_value = v;
        best = n;
      }
    }
    double a = lo + (hi - lo) * std::max(best - 1, 0) / kGrid;
    double b = lo + (hi - lo) * std::min(best + 1, kGrid) / kGrid;
    constexpr double kInvPhi = 0.61803398874989484820;
    double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
    double gc = g(c), gd = g(d);
    while (b - a > 1e-12 * (1.0 + std::abs(a))) {
      if (gc < gd) {
        b = d;
        d = c;
        gd = gc;
        c = b - kInvPhi * (b - a);
        gc = g(c);
      } else {
        a = c;
        c = d;
        gc = gd;
        d = a + kInvPhi * (b - a);
        gd = g(d);
      }
    }
    return std::min({best_value, gc, gd});
  }

  StateSpace space_;
  InteractionKernel kernel_;
  double sigma_;
  FieldFamily field_;
};

// c^[k](a | w) on A*: the cemetery row is M - sup_mass (zero at k = -1).
template <RateModel Model>
double local_inf_rate(const Model& model, const Site& i, SpinValue a, int k, std::span<const double> w) {
  if (a.is_cemetery()) return k < 0 ? 0.0 : std::max(0.0, model.mass_bound(i) - model.sup_mass(i, k, w));
  return model.inf_rate(i, k, a.value(), w);
}

template <RateModel Model>
double local_inf_rate(const Model& model, const Site& i, SpinValue a, int k, const LocalConfiguration& w) {
  const auto values = gather_local(w, i, k);
  return local_inf_rate(model, i, a, k, std::span<const double>(values));
}

}  // namespace pssim

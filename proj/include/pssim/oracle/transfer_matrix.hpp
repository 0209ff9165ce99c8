#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <vector>

// Infinite-volume 1-d nearest-neighbour Ising quantities from the 2x2
// transfer matrix T(s, s') = exp(beta J s s' + beta h (s + s') / 2).
namespace pssim::oracle {

class Ising1dExact {
 public:
  Ising1dExact(double beta, double coupling, double field) : beta_(beta), j_(coupling), h_(field) {
    const double a = std::exp(beta * (coupling + field));    // T(+,+)
    const double b = std::exp(-beta * coupling);             // T(+,-)
    const double c = std::exp(beta * (coupling - field));    // T(-,-)
    // Symmetric 2x2 [[a, b], [b, c]]: leading eigenpair.
    const double mean = 0.5 * (a + c);
    const double disc = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    lead_ = mean + disc;
    second_ = mean - disc;
    double vp = b, vm = lead_ - a;  // (T - lead) v = 0
    if (std::abs(vp) + std::abs(vm) < 1e-300) {
      vp = 1.0;
      vm = 0.0;
    }
    const double nrm = std::hypot(vp, vm);
    v_plus_ = std::abs(vp) / nrm;
    v_minus_ = std::abs(vm) / nrm;
    t_[0][0] = c;
    t_[0][1] = b;
    t_[1][0] = b;
    t_[1][1] = a;
  }

  double magnetization() const { return v_plus_ * v_plus_ - v_minus_ * v_minus_; }

  // E[sigma_0 sigma_1]
  double nearest_correlation() const {
    const auto m = window_marginal(2);
    double s = 0.0;
    for (const auto& [cfg, p] : m) s += p * cfg[0] * cfg[1];
    return s;
  }

  // Law of (sigma_0, ..., sigma_{n-1}) keyed by the spin vector.
  std::map<std::vector<int>, double> window_marginal(int n) const {
    if (n < 1 || n > 20) throw std::invalid_argument("window length must be in [1, 20]");
    std::map<std::vector<int>, double> out;
    const std::size_t states = std::size_t{1} << n;
    for (std::size_t s = 0; s < states; ++s) {
      std::vector<int> cfg(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) cfg[static_cast<std::size_t>(i)] = (s >> i) & 1 ? 1 : -1;
      double p = vec(cfg.front()) * vec(cfg.back());
      for (int i = 0; i + 1 < n; ++i)
        p *= t_[idx(cfg[static_cast<std::size_t>(i)])][idx(cfg[static_cast<std::size_t>(i + 1)])] / lead_;
      out[cfg] = p;
    }
    return out;
  }

  double leading_eigenvalue() const { return lead_; }
  double second_eigenvalue() const { return second_; }

 private:
  static std::size_t idx(int s) { return s > 0 ? 1 : 0; }
  double vec(int s) const { return s > 0 ? v_plus_ : v_minus_; }

  double beta_, j_, h_;
  double lead_ = 0.0, second_ = 0.0;
  double v_plus_ = 0.0, v_minus_ = 0.0;
  double t_[2][2]{};
};

inline Ising1dExact ising_1d_exact(double beta, double coupling = 1.0, double field = 0.0) {
  return Ising1dExact(beta, coupling, field);
}

}  // namespace pssim::oracle

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "pssim/oracle/enumeration.hpp"

// Conventional forward simulation of a FiniteSpec on the torus (Z / n)^d,
// uniformized at the spec's mass bound: a uniformly chosen site rings and
// adopts value a with probability weight(a) c(a, eta) / M, else keeps its value.
namespace pssim::oracle {

struct WindowEstimate {
  std::vector<double> mean;  // per window site, E[value]
  std::vector<double> se;    // batch-means standard errors
  double product_mean = 0.0; // E[prod over the window of values]
  double product_se = 0.0;
};

class GlauberTorus {
 public:
  GlauberTorus(FiniteSpec spec, int side, std::uint64_t seed)
      : spec_(std::move(spec)), side_(side), rng_(seed), offs_(ball(spec_.d, spec_.range)) {
    if (side < 2 * spec_.range + 1) throw std::invalid_argument("torus too small for the interaction range");
    std::size_t n = 1;
    for (int a = 0; a < spec_.d; ++a) n *= static_cast<std::size_t>(side);
    state_.assign(n, 0);
    // Mass bound by enumeration.
    mass_ = enumerate_decomposition(spec_).mass;
  }

  void fill(std::size_t value_index) { std::fill(state_.begin(), state_.end(), value_index); }

  void fill_random() {
    std::uniform_int_distribution<std::size_t> pick(0, spec_.values.size() - 1);
    for (auto& s : state_) s = pick(rng_);
  }

  std::size_t sites() const { return state_.size(); }
  double mass() const { return mass_; }

  // Continuous-time evolution for duration t (total clock rate sites * M).
  void run_time(double t) {
    std::exponential_distribution<double> hold(static_cast<double>(sites()) * mass_);
    double now = hold(rng_);
    while (now < t) {
      update_random_site();
      now += hold(rng_);
    }
  }

  void sweeps(std::size_t count) {
    for (std::size_t n = 0; n < count * sites(); ++n) update_random_site();
  }

  double value_at(const std::vector<int>& coords) const { return spec_.values[state_[linear(coords)]]; }

  // Long-run window statistics after burn-in, with batch means over
  // `batches` batches of `per_batch` sweeps each.
  WindowEstimate window_statistics(const std::vector<std::vector<int>>& window, std::size_t burn_in,
                                   std::size_t batches, std::size_t per_batch) {
    sweeps(burn_in);
    std::vector<std::vector<double>> batch_means(window.size());
    std::vector<double> batch_products;
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<double> acc(window.size(), 0.0);
      double prod_acc = 0.0;
      for (std::size_t s = 0; s < per_batch; ++s) {
        sweeps(1);
        double prod = 1.0;
        for (std::size_t w = 0; w < window.size(); ++w) {
          const double v = value_at(window[w]);
          acc[w] += v;
          prod *= v;
        }
        prod_acc += prod;
      }
      for (std::size_t w = 0; w < window.size(); ++w) batch_means[w].push_back(acc[w] / static_cast<double>(per_batch));
      batch_products.push_back(prod_acc / static_cast<double>(per_batch));
    }
    WindowEstimate out;
    for (const auto& bm : batch_means) {
      const auto [m, se] = mean_se(bm);
      out.mean.push_back(m);
      out.se.push_back(se);
    }
    std::tie(out.product_mean, out.product_se) = mean_se(batch_products);
    return out;
  }

 private:
  static std::pair<double, double> mean_se(const std::vector<double>& xs) {
    double s1 = 0.0, s2 = 0.0;
    for (double x : xs) {
      s1 += x;
      s2 += x * x;
    }
    const double n = static_cast<double>(xs.size());
    const double m = s1 / n;
    const double var = xs.size() > 1 ? std::max(0.0, (s2 - n * m * m) / (n - 1.0)) : 0.0;
    return {m, std::sqrt(var / n)};
  }

  std::size_t linear(const std::vector<int>& coords) const {
    std::size_t idx = 0;
    for (int a = 0; a < spec_.d; ++a) {
      const int c = ((coords[static_cast<std::size_t>(a)] % side_) + side_) % side_;
      idx = idx * static_cast<std::size_t>(side_) + static_cast<std::size_t>(c);
    }
    return idx;
  }

  std::vector<int> coords_of(std::size_t idx) const {
    std::vector<int> c(static_cast<std::size_t>(spec_.d));
    for (int a = spec_.d - 1; a >= 0; --a) {
      c[static_cast<std::size_t>(a)] = static_cast<int>(idx % static_cast<std::size_t>(side_));
      idx /= static_cast<std::size_t>(side_);
    }
    return c;
  }

  void update_random_site() {
    std::uniform_int_distribution<std::size_t> pick(0, sites() - 1);
    const std::size_t site = pick(rng_);
    const auto centre = coords_of(site);
    std::vector<std::size_t> cfg(offs_.size());
    std::vector<int> at(static_cast<std::size_t>(spec_.d));
    for (std::size_t n = 0; n < offs_.size(); ++n) {
      for (int a = 0; a < spec_.d; ++a)
        at[static_cast<std::size_t>(a)] = centre[static_cast<std::size_t>(a)] + offs_[n][static_cast<std::size_t>(a)];
      cfg[n] = state_[linear(at)];
    }
    std::uniform_real_distribution<double> unif(0.0, mass_);
    double u = unif(rng_);
    for (std::size_t a = 0; a < spec_.values.size(); ++a) {
      const double r = spec_.weights[a] * spec_.rate(a, cfg);
      if (u < r) {
        state_[site] = a;
        return;
      }
      u -= r;
    }
  }

  FiniteSpec spec_;
  int side_;
  std::mt19937_64 rng_;
  std::vector<std::vector<int>> offs_;
  std::vector<std::size_t> state_;
  double mass_ = 0.0;
};

// E[value at the origin] at forward time t from a constant start, averaged
// over independent torus runs.
inline std::pair<double, double> glauber_transient_mean(const FiniteSpec& spec, int side, std::size_t start_index,
                                                        double t, std::size_t runs, std::uint64_t seed) {
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t r = 0; r < runs; ++r) {
    GlauberTorus g(spec, side, seed + 7919 * r);
    g.fill(start_index);
    g.run_time(t);
    const double v = g.value_at(std::vector<int>(static_cast<std::size_t>(spec.d), 0));
    s1 += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(runs);
  const double m = s1 / n;
  return {m, std::sqrt(std::max(0.0, s2 / n - m * m) / n)};
}

}  // namespace pssim::oracle

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "pssim/random.hpp"

namespace pssim {

// The spin space A with its finite reference measure: either finitely many
// real atoms with positive weights, or an interval carrying a constant
// density.
class StateSpace {
 public:
  static StateSpace finite(std::vector<double> values, std::vector<double> weights = {}) {
    if (values.empty()) throw std::invalid_argument("finite state space needs at least one value");
    if (weights.empty()) weights.assign(values.size(), 1.0);
    if (weights.size() != values.size())
      throw std::invalid_argument("state space values and weights differ in length");
    std::vector<std::size_t> order(values.size());
    for (std::size_t n = 0; n < order.size(); ++n) order[n] = n;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    StateSpace s;
    s.finite_ = true;
    for (auto n : order) {
      if (!(weights[n] > 0.0) || !std::isfinite(weights[n]))
        throw std::invalid_argument("reference weights must be positive");
      if (!s.values_.empty() && s.values_.back() == values[n])
        throw std::invalid_argument("duplicate state space value");
      s.values_.push_back(values[n]);
      s.weights_.push_back(weights[n]);
    }
    s.lower_ = s.values_.front();
    s.upper_ = s.values_.back();
    return s;
  }

  static StateSpace interval(double lower, double upper, double density = 1.0) {
    if (!(lower < upper) || !std::isfinite(lower) || !std::isfinite(upper))
      throw std::invalid_argument("interval state space needs finite lower < upper");
    if (!(density > 0.0)) throw std::invalid_argument("reference density must be positive");
    StateSpace s;
    s.finite_ = false;
    s.lower_ = lower;
    s.upper_ = upper;
    s.density_ = density;
    return s;
  }

  bool is_finite() const { return finite_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& weights() const { return weights_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  double density() const { return density_; }
  std::size_t size() const { return values_.size(); }

  // rho(A)
  double mass() const {
    if (!finite_) return density_ * (upper_ - lower_);
    double m = 0.0;
    for (double w : weights_) m += w;
    return m;
  }

  bool contains(double a) const {
    if (!finite_) return a >= lower_ && a <= upper_;
    return std::binary_search(values_.begin(), values_.end(), a);
  }

  std::size_t index_of(double a) const {
    auto it = std::lower_bound(values_.begin(), values_.end(), a);
    if (it == values_.end() || *it != a) throw std::invalid_argument("value not in state space");
    return static_cast<std::size_t>(it - values_.begin());
  }

  // Draw from rho / rho(A).
  double sample_reference(Stream& rng) const {
    if (!finite_) return lower_ + rng.uniform() * (upper_ - lower_);
    double u = rng.uniform() * mass();
    for (std::size_t n = 0; n < values_.size(); ++n) {
      if (u < weights_[n]) return values_[n];
      u -= weights_[n];
    }
    return values_.back();
  }

 private:
  StateSpace() = default;

  bool finite_ = true;
  std::vector<double> values_;
  std::vector<double> weights_;
  double lower_ = 0.0;
  double upper_ = 0.0;
  double density_ = 1.0;
};

}  // namespace pssim

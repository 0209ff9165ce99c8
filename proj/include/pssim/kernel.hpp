#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pssim/lattice.hpp"

namespace pssim {

// Translation-invariant pairwise potential J(i, j) = K(j - i), given as one of
// a few named families so that shell sums and tails are exact.
class InteractionKernel {
 public:
  enum class Family { table, nearest_neighbor, exponential, power_law };

  static InteractionKernel zero(int d) { return table(d, {}); }

  static InteractionKernel nearest_neighbor(int d, double coupling) {
    InteractionKernel k(d, Family::nearest_neighbor);
    k.theta_ = coupling;
    k.range_ = 1;
    k.finish();
    return k;
  }

  // Finite-range table of offsets; K(0) must vanish.
  static InteractionKernel table(int d, std::vector<std::pair<Site, double>> entries) {
    InteractionKernel k(d, Family::table);
    int range = 0;
    for (auto& [off, value] : entries) {
      if (off.dimension() != d) throw std::invalid_argument("kernel offset has wrong dimension");
      if (off.l1_norm() == 0 && value != 0.0) throw std::invalid_argument("kernel must vanish at the origin");
      if (!std::isfinite(value)) throw std::invalid_argument("kernel entries must be finite");
      k.entries_[off] += value;
      range = std::max(range, off.l1_norm());
    }
    k.range_ = range;
    k.finish();
    return k;
  }

  // K(x) = theta r^|x| for |x| >= 1, optionally cut off beyond `range`.
  static InteractionKernel exponential(int d, double theta, double r, std::optional<int> range = std::nullopt) {
    if (!(r >= 0.0 && r < 1.0)) throw std::invalid_argument("exponential kernel needs 0 <= r < 1");
    if (range && *range < 0) throw std::invalid_argument("kernel range must be non-negative");
    InteractionKernel k(d, Family::exponential);
    k.theta_ = theta;
    k.r_ = r;
    k.range_ = range;
    k.finish();
    return k;
  }

  // K(x) = theta |x|^-p for 1 <= |x| <= range.
  static InteractionKernel power_law(int d, double theta, double p, int range) {
    if (range < 0) throw std::invalid_argument("kernel range must be non-negative");
    InteractionKernel k(d, Family::power_law);
    k.theta_ = theta;
    k.p_ = p;
    k.range_ = range;
    k.finish();
    return k;
  }

  int dimension() const { return d_; }
  Family family() const { return family_; }
  // L such that K vanishes beyond L; nullopt for infinite range.
  std::optional<int> range() const { return range_; }

  double coupling(const Site& offset) const {
    const int m = offset.l1_norm();
    if (m == 0) return 0.0;
    if (range_ && m > *range_) return 0.0;
    switch (family_) {
      case Family::table: {
        auto it = entries_.find(offset);
        return it == entries_.end() ? 0.0 : it->second;
      }
      case Family::nearest_neighbor:
        return theta_;
      case Family::exponential:
        return theta_ * std::pow(r_, m);
      case Family::power_law:
        return theta_ * std::pow(static_cast<double>(m), -p_);
    }
    return 0.0;
  }

  // Sums of J^+ and J^- over the shell |x| = m.
  double shell_positive(int m) const { return shell_value(pos_shell_, m); }
  double shell_negative(int m) const { return shell_value(neg_shell_, m); }
  double shell_absolute(int m) const { return shell_positive(m) + shell_negative(m); }

  // Sums over the ball |x| <= k (zero for k < 0).
  double partial_positive(int k) const { return positive_total_ - tail_positive(k); }
  double partial_negative(int k) const { return negative_total_ - tail_negative(k); }

  // S^{>k} split by sign: sums over |x| > k.
  double tail_positive(int k) const { return tail_value(pos_tail_, pos_remainder_, k); }
  double tail_negative(int k) const { return tail_value(neg_tail_, neg_remainder_, k); }
  double tail_absolute(int k) const { return tail_positive(k) + tail_negative(k); }

  // Sigma = sum_x |K(x)|, and the signed total.
  double absolute_total() const { return positive_total_ + negative_total_; }
  double signed_total() const { return positive_total_ - negative_total_; }

  bool is_nonnegative() const { return negative_total_ == 0.0; }

  // K over V_0(k), aligned with ball_offsets(d, k).
  const std::vector<double>& ball_couplings(int k) const {
    std::lock_guard lock(cache_->mutex);
    auto& slot = cache_->rows[k];
    if (!slot) {
      const auto& offs = ball_offsets(d_, k);
      auto row = std::make_unique<std::vector<double>>();
      row->reserve(offs.size());
      for (const auto& o : offs) row->push_back(coupling(o));
      slot = std::move(row);
    }
    return *slot;
  }

  // Explicit (offset, value) list of nonzero couplings; finite range only.
  std::vector<std::pair<Site, double>> nonzero_entries() const {
    if (!range_) throw std::logic_error("infinite-range kernel has no finite entry list");
    std::vector<std::pair<Site, double>> out;
    for (const auto& o : ball_offsets(d_, *range_)) {
      const double v = coupling(o);
      if (v != 0.0) out.emplace_back(o, v);
    }
    return out;
  }

 private:
  InteractionKernel(int d, Family f) : d_(d), family_(f), cache_(std::make_shared<Cache>()) {
    if (d < 1 || d > kMaxDimension) throw std::invalid_argument("kernel dimension out of range");
  }

  struct Cache {
    std::mutex mutex;
    std::map<int, std::unique_ptr<const std::vector<double>>> rows;
  };

  double shell_magnitude(int m) const {
    // |K| summed over the shell, for the closed-form families.
    const double count = static_cast<double>(shell_size(d_, m));
    switch (family_) {
      case Family::nearest_neighbor:
        return m == 1 ? theta_ * count : 0.0;
      case Family::exponential:
        return theta_ * std::pow(r_, m) * count;
      case Family::power_law:
        return theta_ * std::pow(static_cast<double>(m), -p_) * count;
      case Family::table:
        break;
    }
    return 0.0;
  }

  void finish() {
    int top;
    if (range_) {
      top = *range_;
    } else {
      // Infinite exponential tail: tabulate shells until they are negligible
      // relative to the first one; the remainder is bounded geometrically.
      top = 1;
      const double first = std::abs(shell_magnitude(1));
      while (top < 100000) {
        const double t = std::abs(shell_magnitude(top + 1));
        if (first == 0.0 || (t < 1e-40 * first && top > 8)) break;
        ++top;
      }
    }
    pos_shell_.assign(static_cast<std::size_t>(top) + 1, 0.0);
    neg_shell_.assign(static_cast<std::size_t>(top) + 1, 0.0);
    if (family_ == Family::table) {
      for (const auto& [off, v] : entries_) {
        auto m = static_cast<std::size_t>(off.l1_norm());
        (v >= 0 ? pos_shell_[m] : neg_shell_[m]) += std::abs(v);
      }
    } else {
      for (int m = 1; m <= top; ++m) {
        const double s = shell_magnitude(m);
        (s >= 0 ? pos_shell_ : neg_shell_)[static_cast<std::size_t>(m)] = std::abs(s);
      }
    }
    if (!range_) {
      // Terms are (poly of degree d-1) * r^m; past the tabulated point their
      // successive ratios are below r (1 + 1/top)^(d-1) < 1.
      const double q = r_ * std::pow(1.0 + 1.0 / top, d_ - 1);
      const double last = std::abs(shell_magnitude(top));
      const double rem = q < 1.0 ? last * q / (1.0 - q) : 0.0;
      (theta_ >= 0 ? pos_remainder_ : neg_remainder_) = rem;
    }
    pos_tail_.assign(static_cast<std::size_t>(top) + 2, 0.0);
    neg_tail_.assign(static_cast<std::size_t>(top) + 2, 0.0);
    // tail_[k + 1] = sum over m > k, k = -1..top
    double pacc = pos_remainder_, nacc = neg_remainder_;
    for (int k = top; k >= -1; --k) {
      pos_tail_[static_cast<std::size_t>(k + 1)] = pacc;
      neg_tail_[static_cast<std::size_t>(k + 1)] = nacc;
      if (k >= 0) {
        pacc += pos_shell_[static_cast<std::size_t>(k)];
        nacc += neg_shell_[static_cast<std::size_t>(k)];
      }
    }
    positive_total_ = pos_tail_[0];
    negative_total_ = neg_tail_[0];
  }

  static double shell_value(const std::vector<double>& shells, int m) {
    if (m < 0 || static_cast<std::size_t>(m) >= shells.size()) return 0.0;
    return shells[static_cast<std::size_t>(m)];
  }

  double tail_value(const std::vector<double>& tails, double remainder, int k) const {
    if (k < -1) k = -1;
    if (static_cast<std::size_t>(k + 1) < tails.size()) return tails[static_cast<std::size_t>(k + 1)];
    if (range_) return 0.0;
    // Beyond the tabulated shells only the geometric remainder bound is left.
    const int top = static_cast<int>(tails.size()) - 2;
    return remainder * std::pow(r_, k - top);
  }

  int d_;
  Family family_;
  double theta_ = 0.0;
  double r_ = 0.0;
  double p_ = 0.0;
  std::optional<int> range_;
  std::map<Site, double> entries_;
  std::vector<double> pos_shell_, neg_shell_;
  std::vector<double> pos_tail_, neg_tail_;
  double pos_remainder_ = 0.0, neg_remainder_ = 0.0;
  double positive_total_ = 0.0, negative_total_ = 0.0;
  std::shared_ptr<Cache> cache_;
};

}  // namespace pssim

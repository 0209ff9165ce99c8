#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pssim {

inline constexpr int kMaxDimension = 4;

// A point of Z^d, 1 <= d <= kMaxDimension. Ordering is lexicographic on the
// coordinates for sites of equal dimension.
class Site {
 public:
  Site() = default;

  explicit Site(int dimension) : dim_(dimension) {
    if (dimension < 1 || dimension > kMaxDimension)
      throw std::invalid_argument("site dimension must be in [1, " +
                                  std::to_string(kMaxDimension) + "]");
  }

  Site(std::initializer_list<int> coords) : Site(static_cast<int>(coords.size())) {
    int n = 0;
    for (int c : coords) coords_[n++] = c;
  }

  static Site from(std::span<const int> coords) {
    Site s(static_cast<int>(coords.size()));
    for (std::size_t n = 0; n < coords.size(); ++n) s.coords_[n] = coords[n];
    return s;
  }

  int dimension() const { return dim_; }
  int operator[](int axis) const { return coords_[axis]; }
  int& operator[](int axis) { return coords_[axis]; }

  int l1_norm() const {
    int s = 0;
    for (int a = 0; a < dim_; ++a) s += coords_[a] < 0 ? -coords_[a] : coords_[a];
    return s;
  }

  int parity() const {
    int s = 0;
    for (int a = 0; a < dim_; ++a) s += coords_[a];
    return ((s % 2) + 2) % 2;
  }

  Site operator+(const Site& o) const {
    Site r = *this;
    for (int a = 0; a < dim_; ++a) r.coords_[a] += o.coords_[a];
    return r;
  }
  Site operator-(const Site& o) const {
    Site r = *this;
    for (int a = 0; a < dim_; ++a) r.coords_[a] -= o.coords_[a];
    return r;
  }

  friend auto operator<=>(const Site&, const Site&) = default;
  friend bool operator==(const Site&, const Site&) = default;

  // "(x,y,...)"; also the key format of the JSONL sample output.
  std::string str() const {
    std::string s = "(";
    for (int a = 0; a < dim_; ++a) {
      if (a) s += ',';
      s += std::to_string(coords_[a]);
    }
    return s + ")";
  }

 private:
  std::array<int, kMaxDimension> coords_{};
  int dim_ = 0;
};

inline int l1_distance(const Site& a, const Site& b) { return (a - b).l1_norm(); }

// |V(k)| in d dimensions: sum_j 2^j C(d,j) C(k,j). Zero for k < 0.
inline std::size_t ball_size(int d, int k) {
  if (k < 0) return 0;
  std::size_t total = 0;
  std::size_t choose_d = 1;  // C(d, j)
  std::size_t choose_k = 1;  // C(k, j)
  std::size_t pow2 = 1;
  for (int j = 0; j <= d && j <= k; ++j) {
    total += pow2 * choose_d * choose_k;
    choose_d = choose_d * static_cast<std::size_t>(d - j) / static_cast<std::size_t>(j + 1);
    choose_k = choose_k * static_cast<std::size_t>(k - j) / static_cast<std::size_t>(j + 1);
    pow2 *= 2;
  }
  return total;
}

// Number of sites at L1 distance exactly m.
inline std::size_t shell_size(int d, int m) {
  if (m < 0) return 0;
  return ball_size(d, m) - ball_size(d, m - 1);
}

namespace detail {

inline void fill_ball(int d, int axis, int remaining, Site& cur, std::vector<Site>& out) {
  if (axis == d) {
    out.push_back(cur);
    return;
  }
  for (int x = -remaining; x <= remaining; ++x) {
    cur[axis] = x;
    fill_ball(d, axis + 1, remaining - (x < 0 ? -x : x), cur, out);
  }
  cur[axis] = 0;
}

struct BallCache {
  std::mutex mutex;
  std::map<std::pair<int, int>, std::unique_ptr<const std::vector<Site>>> offsets;
};

inline BallCache& ball_cache() {
  static BallCache cache;
  return cache;
}

}  // namespace detail

// Offsets of V_0(k) in lexicographic order. Cached; the returned reference
// stays valid for the life of the program.
inline const std::vector<Site>& ball_offsets(int d, int k) {
  if (k < 0) throw std::invalid_argument("ball radius must be non-negative");
  auto& cache = detail::ball_cache();
  std::lock_guard lock(cache.mutex);
  auto& slot = cache.offsets[{d, k}];
  if (!slot) {
    std::vector<Site> out;
    out.reserve(ball_size(d, k));
    Site cur(d);
    detail::fill_ball(d, 0, k, cur, out);
    slot = std::make_unique<const std::vector<Site>>(std::move(out));
  }
  return *slot;
}

// V_center(k), lexicographically ordered.
inline std::vector<Site> ball_sites(const Site& center, int k) {
  if (k < 0) throw std::invalid_argument("ball radius must be non-negative, got " + std::to_string(k));
  const auto& offs = ball_offsets(center.dimension(), k);
  std::vector<Site> out;
  out.reserve(offs.size());
  for (const auto& o : offs) out.push_back(center + o);
  return out;
}

struct Ball {
  Site center;
  int radius = 0;

  std::vector<Site> members() const { return ball_sites(center, radius); }
  bool contains(const Site& s) const { return l1_distance(s, center) <= radius; }
};

// Element of A* = A u {Cemetery}.
class SpinValue {
 public:
  constexpr SpinValue() = default;

  static constexpr SpinValue cemetery() { return SpinValue(); }
  static constexpr SpinValue real(double x) {
    SpinValue v;
    v.value_ = x;
    v.cemetery_ = false;
    return v;
  }

  constexpr bool is_cemetery() const { return cemetery_; }
  constexpr bool is_real() const { return !cemetery_; }

  double value() const {
    if (cemetery_) throw std::logic_error("cemetery carries no real value");
    return value_;
  }

  friend constexpr bool operator==(const SpinValue& a, const SpinValue& b) {
    return a.cemetery_ == b.cemetery_ && (a.cemetery_ || a.value_ == b.value_);
  }

  std::string str() const { return cemetery_ ? std::string("cemetery") : std::to_string(value_); }

 private:
  double value_ = 0.0;
  bool cemetery_ = true;
};

using LocalConfiguration = std::map<Site, SpinValue>;

// Finite partial map Site -> SpinValue over the infinite lattice; unassigned
// sites read as the default value.
class SparseConfiguration {
 public:
  SparseConfiguration() = default;
  explicit SparseConfiguration(SpinValue fallback) : default_(fallback) {}

  SpinValue get(const Site& s) const {
    auto it = assignments_.find(s);
    return it == assignments_.end() ? default_ : it->second;
  }

  void set(const Site& s, SpinValue v) {
    if (v.is_cemetery())
      throw std::invalid_argument("cemetery may only appear as the default value");
    assignments_[s] = v;
  }

  void set(const Site& s, double x) { assignments_[s] = SpinValue::real(x); }

  SpinValue fallback() const { return default_; }
  const std::map<Site, SpinValue>& assignments() const { return assignments_; }
  bool is_assigned(const Site& s) const { return assignments_.count(s) != 0; }

 private:
  std::map<Site, SpinValue> assignments_;
  SpinValue default_ = SpinValue::cemetery();
};

inline LocalConfiguration restrict(const SparseConfiguration& config, const Ball& ball) {
  LocalConfiguration out;
  for (const auto& s : ball.members()) out.emplace(s, config.get(s));
  return out;
}

inline LocalConfiguration restrict(const LocalConfiguration& local, const Ball& ball) {
  LocalConfiguration out;
  for (const auto& [s, v] : local)
    if (ball.contains(s)) out.emplace(s, v);
  return out;
}

}  // namespace pssim

template <>
struct std::hash<pssim::Site> {
  std::size_t operator()(const pssim::Site& s) const noexcept {
    std::uint64_t h = 1469598103934665603ULL ^ static_cast<std::uint64_t>(s.dimension());
    for (int a = 0; a < s.dimension(); ++a) {
      h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(s[a]));
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pssim/decomposition.hpp"
#include "pssim/error.hpp"
#include "pssim/lattice.hpp"
#include "pssim/parallel.hpp"
#include "pssim/random.hpp"

namespace pssim {

struct SketchEvent {
  Site site;
  int range = -1;
  std::size_t index = 0;  // 1-based position in B
  double time = std::numeric_limits<double>::quiet_NaN();
};

enum class Truncation { none, steps, range, horizon };

inline const char* truncation_name(Truncation t) {
  switch (t) {
    case Truncation::none: return "none";
    case Truncation::steps: return "steps";
    case Truncation::range: return "range";
    case Truncation::horizon: return "horizon";
  }
  return "none";
}

struct SketchRecord {
  std::vector<Site> query;
  std::vector<SketchEvent> events;
  std::size_t n_stop = 0;
  bool timed = false;
  double t_stop = 0.0;
  std::vector<Site> residual;  // C at the end; empty on success
  Truncation truncation = Truncation::none;
  double bias_bound = 0.0;

  bool truncated() const { return truncation == Truncation::steps || truncation == Truncation::range; }
};

// Ancestor set C as a sorted vector of sites.
class AncestorSet {
 public:
  AncestorSet() = default;
  explicit AncestorSet(std::vector<Site> sites) : sites_(std::move(sites)) {
    std::sort(sites_.begin(), sites_.end());
    sites_.erase(std::unique(sites_.begin(), sites_.end()), sites_.end());
  }

  bool empty() const { return sites_.empty(); }
  std::size_t size() const { return sites_.size(); }
  const Site& operator[](std::size_t n) const { return sites_[n]; }
  const std::vector<Site>& sites() const { return sites_; }

  bool contains(const Site& s) const { return std::binary_search(sites_.begin(), sites_.end(), s); }

  void erase(const Site& s) {
    auto it = std::lower_bound(sites_.begin(), sites_.end(), s);
    if (it != sites_.end() && *it == s) sites_.erase(it);
  }

  void insert(const Site& s) {
    auto it = std::lower_bound(sites_.begin(), sites_.end(), s);
    if (it == sites_.end() || *it != s) sites_.insert(it, s);
  }

  // pi^(i,k): remove i for k = -1, otherwise add V_i(k).
  void apply(const Site& i, int k) {
    if (k < 0) {
      erase(i);
      return;
    }
    for (const auto& o : ball_offsets(i.dimension(), k)) insert(i + o);
  }

 private:
  std::vector<Site> sites_;
};

// Sum of M_j over C.
template <RateModel Model>
double total_mass(const AncestorSet& c, const KalikowDecomposition<Model>& decomp) {
  double s = 0.0;
  for (const auto& j : c.sites()) s += decomp.mass(j);
  return s;
}

// One step of the backward sketch: I with probability proportional to M_I,
// then K ~ lambda_I. Consumes one uniform for the site and one for the range.
template <RateModel Model>
SketchEvent sketch_step(AncestorSet& c, const KalikowDecomposition<Model>& decomp, Stream& rng) {
  if (c.empty()) throw std::invalid_argument("sketch step on an empty ancestor set");
  std::size_t pick;
  if (decomp.model().orbit_count() == 1) {
    pick = rng.index(c.size());
  } else {
    double u = rng.uniform() * total_mass(c, decomp);
    pick = c.size() - 1;
    for (std::size_t n = 0; n < c.size(); ++n) {
      const double m = decomp.mass(c[n]);
      if (u < m) {
        pick = n;
        break;
      }
      u -= m;
    }
  }
  SketchEvent ev;
  ev.site = c[pick];
  ev.range = decomp.sample_range(ev.site, rng.uniform());
  c.apply(ev.site, ev.range);
  return ev;
}

namespace detail {

inline std::string format_gamma(double g) {
  std::ostringstream os;
  os.precision(6);
  os << g;
  return os.str();
}

template <RateModel Model>
void require_subcritical(const KalikowDecomposition<Model>& decomp) {
  if (!decomp.subcritical())
    throw SupercriticalError("model is supercritical (gamma = " + format_gamma(decomp.gamma()) +
                                 " >= 1); supply a step cap to run in impatient mode",
                             decomp.gamma());
}

}  // namespace detail

// P(N_STOP > N) <= |F| gamma^N, and the induced bias p / (1 - p).
inline double steps_bias_bound(double gamma, std::size_t n, std::size_t window) {
  if (!(gamma < 1.0)) return std::numeric_limits<double>::infinity();
  const double p = static_cast<double>(window) * std::pow(gamma, static_cast<double>(n));
  return p < 1.0 ? p / (1.0 - p) : std::numeric_limits<double>::infinity();
}

// Backward sketch until the ancestor set dies out, or until step_cap events
// (truncated record, bias bound attached).
template <RateModel Model>
SketchRecord run_backward_sketch(const std::vector<Site>& query, const KalikowDecomposition<Model>& decomp,
                                 Stream& rng, std::optional<std::size_t> step_cap = std::nullopt) {
  if (query.empty()) throw std::invalid_argument("query set is empty");
  if (!step_cap) detail::require_subcritical(decomp);
  SketchRecord rec;
  AncestorSet c(query);
  rec.query = c.sites();
  while (!c.empty()) {
    if (step_cap && rec.events.size() >= *step_cap) {
      rec.truncation = Truncation::steps;
      rec.bias_bound = steps_bias_bound(decomp.gamma(), *step_cap, rec.query.size());
      break;
    }
    try {
      auto ev = sketch_step(c, decomp, rng);
      ev.index = rec.events.size() + 1;
      rec.events.push_back(ev);
    } catch (const RangeCapExceeded& e) {
      rec.truncation = Truncation::range;
      rec.bias_bound = e.bias_bound;
      break;
    }
  }
  rec.n_stop = rec.events.size();
  rec.residual = c.sites();
  return rec;
}

// Time-bounded sketch: holding times Exp(sum_{j in C} M_j) come from the
// separate `clock` stream, so the event sequence matches the untimed sketch
// on the same `rng`. Stops at extinction or when the next event would pass
// reversed time t; that event is not applied.
template <RateModel Model>
SketchRecord run_backward_sketch_timed(const std::vector<Site>& query, double t,
                                       const KalikowDecomposition<Model>& decomp, Stream& rng, Stream& clock,
                                       std::optional<std::size_t> step_cap = std::nullopt) {
  if (query.empty()) throw std::invalid_argument("query set is empty");
  if (!(t > 0.0)) throw std::invalid_argument("time horizon must be positive");
  if (std::isinf(t) && !step_cap) detail::require_subcritical(decomp);
  SketchRecord rec;
  rec.timed = true;
  AncestorSet c(query);
  rec.query = c.sites();
  double now = 0.0;
  while (!c.empty()) {
    if (step_cap && rec.events.size() >= *step_cap) {
      rec.truncation = Truncation::steps;
      rec.bias_bound = steps_bias_bound(decomp.gamma(), *step_cap, rec.query.size());
      break;
    }
    const double hold = clock.exponential(total_mass(c, decomp));
    if (now + hold >= t) {
      now = t;
      rec.truncation = Truncation::horizon;
      break;
    }
    now += hold;
    try {
      auto ev = sketch_step(c, decomp, rng);
      ev.index = rec.events.size() + 1;
      ev.time = now;
      rec.events.push_back(ev);
    } catch (const RangeCapExceeded& e) {
      rec.truncation = Truncation::range;
      rec.bias_bound = e.bias_bound;
      break;
    }
  }
  rec.t_stop = now;
  rec.n_stop = rec.events.size();
  rec.residual = c.sites();
  return rec;
}

struct Estimate {
  double mean = 0.0;
  double se = 0.0;
};

inline Estimate bernoulli_estimate(std::size_t hits, std::size_t n) {
  const double p = n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
  return {p, n ? std::sqrt(p * (1.0 - p) / static_cast<double>(n)) : 0.0};
}

struct AncestorStatistics {
  std::vector<double> horizons;
  std::vector<Estimate> mean_size;        // E|C_s| per horizon
  std::vector<Estimate> time_tail;        // P(T_STOP > s) per horizon
  std::vector<std::size_t> step_thresholds;
  std::vector<Estimate> step_tail;        // P(N_STOP > N) per threshold
  std::size_t replicas = 0;
  std::size_t extinct = 0;
};

// Monte-Carlo ancestor-process statistics over independent replicas of the
// untruncated sketch with event times. Replica r uses the (seed, r) streams.
template <RateModel Model>
AncestorStatistics ancestor_statistics(const std::vector<Site>& query, const KalikowDecomposition<Model>& decomp,
                                       std::uint64_t seed, const std::vector<double>& horizons,
                                       const std::vector<std::size_t>& step_thresholds, std::size_t replicas) {
  detail::require_subcritical(decomp);
  struct Trace {
    std::vector<double> sizes;
    double t_stop = 0.0;
    std::size_t n_stop = 0;
    bool extinct = false;
  };
  auto traces = run_replicas<Trace>(replicas, [&](std::size_t r) {
    Stream rng = replica_stream(seed, r, Lane::events);
    Stream clock = replica_stream(seed, r, Lane::clock);
    const auto rec = run_backward_sketch_timed(query, std::numeric_limits<double>::infinity(), decomp, rng, clock);
    Trace tr;
    tr.t_stop = rec.t_stop;
    tr.n_stop = rec.n_stop;
    tr.extinct = rec.residual.empty();
    AncestorSet c(query);
    std::size_t next = 0;
    for (double s : horizons) {
      while (next < rec.events.size() && rec.events[next].time <= s) {
        c.apply(rec.events[next].site, rec.events[next].range);
        ++next;
      }
      tr.sizes.push_back(static_cast<double>(c.size()));
    }
    return tr;
  });

  AncestorStatistics out;
  out.horizons = horizons;
  out.step_thresholds = step_thresholds;
  out.replicas = replicas;
  const double n = static_cast<double>(replicas);
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    double s1 = 0.0, s2 = 0.0;
    std::size_t alive = 0;
    for (const auto& tr : traces) {
      s1 += tr.sizes[h];
      s2 += tr.sizes[h] * tr.sizes[h];
      if (tr.t_stop > horizons[h]) ++alive;
    }
    const double mean = s1 / n;
    const double var = replicas > 1 ? std::max(0.0, (s2 - n * mean * mean) / (n - 1.0)) : 0.0;
    out.mean_size.push_back({mean, std::sqrt(var / n)});
    out.time_tail.push_back(bernoulli_estimate(alive, replicas));
  }
  for (auto big_n : step_thresholds) {
    std::size_t hits = 0;
    for (const auto& tr : traces)
      if (tr.n_stop > big_n) ++hits;
    out.step_tail.push_back(bernoulli_estimate(hits, replicas));
  }
  for (const auto& tr : traces)
    if (tr.extinct) ++out.extinct;
  return out;
}

}  // namespace pssim

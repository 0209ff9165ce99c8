#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pssim/decomposition.hpp"
#include "pssim/error.hpp"
#include "pssim/lattice.hpp"
#include "pssim/random.hpp"
#include "pssim/sketch.hpp"

namespace pssim {

struct AssignmentResult {
  std::map<Site, SpinValue> spins;  // on the query set
  std::size_t n_stop = 0;
  double t_stop = 0.0;
  std::size_t residual = 0;         // |C| left by a timed sketch
  std::size_t restarts = 0;         // capped sketches discarded
  bool truncated = false;
  double bias_bound = 0.0;          // nonzero when the law is only approximate

  double value(const Site& s) const {
    auto it = spins.find(s);
    if (it == spins.end()) throw std::out_of_range("site " + s.str() + " not in the query set");
    return it->second.value();
  }
};

// Named initial configurations for the finite-horizon sampler.
class InitialCondition {
 public:
  enum class Kind { constant, checkerboard, iid };

  static InitialCondition constant(double v) { return InitialCondition(Kind::constant, v, v, 0); }
  static InitialCondition checkerboard(double even, double odd) {
    return InitialCondition(Kind::checkerboard, even, odd, 0);
  }
  // Independent draws from rho / rho(A), one stream per (seed, site).
  static InitialCondition iid(std::uint64_t seed) { return InitialCondition(Kind::iid, 0.0, 0.0, seed); }

  Kind kind() const { return kind_; }

  double at(const Site& s, const StateSpace& space) const {
    switch (kind_) {
      case Kind::constant:
        return first_;
      case Kind::checkerboard:
        return s.parity() ? second_ : first_;
      case Kind::iid: {
        Stream rng(seed_, std::hash<Site>{}(s), static_cast<std::uint64_t>(Lane::initial));
        return space.sample_reference(rng);
      }
    }
    return first_;
  }

  SparseConfiguration on(const std::vector<Site>& sites, const StateSpace& space) const {
    SparseConfiguration eta;
    for (const auto& s : sites) {
      const double v = at(s, space);
      if (!space.contains(v)) throw std::invalid_argument("initial value outside the state space");
      eta.set(s, v);
    }
    return eta;
  }

 private:
  InitialCondition(Kind k, double a, double b, std::uint64_t seed) : kind_(k), first_(a), second_(b), seed_(seed) {}
  Kind kind_;
  double first_, second_;
  std::uint64_t seed_;
};

// Replays the record from event N_STOP down to 1. One 64-bit seed is drawn
// from `rng` per event in that order and the event's draws come from a
// stream seeded with it, so two replays of one record with equal streams use
// the same randomness event by event. With `initial`, sites of the residual
// set start from it; all other sites start undetermined.
template <RateModel Model>
AssignmentResult run_forward_assignment_with_initial(const SketchRecord& record,
                                                     const SparseConfiguration* initial,
                                                     const KalikowDecomposition<Model>& decomp, Stream& rng) {
  if (record.truncated()) throw std::invalid_argument("cannot assign spins from a truncated sketch record");
  SparseConfiguration sigma;
  if (!record.residual.empty()) {
    if (!initial) throw std::invalid_argument("sketch left a residual set but no initial configuration was given");
    for (const auto& j : record.residual) {
      const auto v = initial->get(j);
      if (v.is_cemetery()) throw std::invalid_argument("initial configuration misses residual site " + j.str());
      sigma.set(j, v);
    }
  }
  for (auto n = record.events.size(); n-- > 0;) {
    const auto& ev = record.events[n];
    Stream draws(rng.next());
    const SpinValue w = ev.range < 0 ? decomp.sample_p_minus1(ev.site, draws)
                                     : decomp.sample_p_k(ev.site, ev.range, sigma, draws);
    if (w.is_real()) sigma.set(ev.site, w);
  }
  AssignmentResult out;
  for (const auto& s : record.query) {
    const auto v = sigma.get(s);
    if (v.is_cemetery()) throw InternalConsistencyError("query site " + s.str() + " left unassigned");
    out.spins.emplace(s, v);
  }
  out.n_stop = record.n_stop;
  out.t_stop = record.t_stop;
  out.residual = record.residual.size();
  return out;
}

template <RateModel Model>
AssignmentResult run_forward_assignment(const SketchRecord& record, const KalikowDecomposition<Model>& decomp,
                                        Stream& rng) {
  return run_forward_assignment_with_initial(record, nullptr, decomp, rng);
}

template <RateModel Model>
AssignmentResult run_forward_assignment_with_initial(const SketchRecord& record, const SparseConfiguration& initial,
                                                     const KalikowDecomposition<Model>& decomp, Stream& rng) {
  return run_forward_assignment_with_initial(record, &initial, decomp, rng);
}

struct SamplerOptions {
  std::optional<std::size_t> step_cap;
  std::size_t max_restarts = 1'000'000;
};

namespace detail {

template <RateModel Model>
double range_bias_of(const KalikowDecomposition<Model>& decomp) {
  return decomp.exact() ? 0.0 : decomp.range_bias_at(decomp.top());
}

}  // namespace detail

// Backward sketch then forward assignment on one stream. With a step cap,
// capped sketches are discarded and redrawn, so the output follows the law
// conditioned on N_STOP <= cap; the bias bound is attached.
template <RateModel Model>
AssignmentResult perfect_sample(const std::vector<Site>& query, const KalikowDecomposition<Model>& decomp,
                                Stream& rng, const SamplerOptions& opts = {}) {
  std::size_t restarts = 0;
  for (;;) {
    auto rec = run_backward_sketch(query, decomp, rng, opts.step_cap);
    if (rec.truncated()) {
      if (++restarts > opts.max_restarts)
        throw SamplerError("no complete sketch within " + std::to_string(opts.max_restarts) + " restarts");
      continue;
    }
    auto out = run_forward_assignment(rec, decomp, rng);
    out.restarts = restarts;
    out.truncated = restarts > 0;
    out.bias_bound = detail::range_bias_of(decomp);
    if (opts.step_cap) out.bias_bound += steps_bias_bound(decomp.gamma(), *opts.step_cap, rec.query.size());
    return out;
  }
}

// Law of sigma_t^eta on the query set: timed sketch of length t, residual
// sites started from the initial configuration.
template <RateModel Model>
AssignmentResult finite_horizon_sample(const std::vector<Site>& query, double t, const InitialCondition& initial,
                                       const KalikowDecomposition<Model>& decomp, Stream& rng, Stream& clock,
                                       const SamplerOptions& opts = {}) {
  std::size_t restarts = 0;
  for (;;) {
    auto rec = run_backward_sketch_timed(query, t, decomp, rng, clock, opts.step_cap);
    if (rec.truncated()) {
      if (++restarts > opts.max_restarts)
        throw SamplerError("no complete sketch within " + std::to_string(opts.max_restarts) + " restarts");
      continue;
    }
    const auto eta = initial.on(rec.residual, decomp.model().state_space());
    auto out = run_forward_assignment_with_initial(rec, eta, decomp, rng);
    out.restarts = restarts;
    out.truncated = restarts > 0;
    out.bias_bound = detail::range_bias_of(decomp);
    if (opts.step_cap) out.bias_bound += steps_bias_bound(decomp.gamma(), *opts.step_cap, rec.query.size());
    return out;
  }
}

struct CoupledPair {
  AssignmentResult first;
  AssignmentResult second;
  bool coalesced = false;  // residual set empty: both runs are the same draw
};

// Two initial conditions driven by one timed sketch and shared draws.
template <RateModel Model>
CoupledPair finite_horizon_pair(const std::vector<Site>& query, double t, const InitialCondition& eta,
                                const InitialCondition& zeta, const KalikowDecomposition<Model>& decomp, Stream& rng,
                                Stream& clock) {
  auto rec = run_backward_sketch_timed(query, t, decomp, rng, clock);
  if (rec.truncated()) throw SamplerError("timed sketch truncated");
  const auto& space = decomp.model().state_space();
  Stream shared = rng;
  CoupledPair out;
  out.first = run_forward_assignment_with_initial(rec, eta.on(rec.residual, space), decomp, rng);
  out.second = run_forward_assignment_with_initial(rec, zeta.on(rec.residual, space), decomp, shared);
  out.coalesced = rec.residual.empty();
  return out;
}

}  // namespace pssim

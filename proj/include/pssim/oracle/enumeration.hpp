#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

// Brute-force decomposition by exhausting A^{V(L)}. Deliberately shares no
// code with the engine: its own ball enumeration, its own rates.
namespace pssim::oracle {

// Offsets of the L1 ball of radius k in Z^d, lexicographic.
inline std::vector<std::vector<int>> ball(int d, int k) {
  std::vector<std::vector<int>> out;
  if (k < 0) return out;
  std::vector<int> x(static_cast<std::size_t>(d), -k);
  for (;;) {
    int norm = 0;
    for (int v : x) norm += std::abs(v);
    if (norm <= k) out.push_back(x);
    int axis = d - 1;
    while (axis >= 0 && x[static_cast<std::size_t>(axis)] == k) {
      x[static_cast<std::size_t>(axis)] = -k;
      --axis;
    }
    if (axis < 0) break;
    ++x[static_cast<std::size_t>(axis)];
  }
  return out;
}

inline int norm1(const std::vector<int>& x) {
  int s = 0;
  for (int v : x) s += std::abs(v);
  return s;
}

// A finite-A, finite-range model: rate(a_index, config) where config holds
// value indices on ball(d, L) in order.
struct FiniteSpec {
  int d = 1;
  int range = 1;
  std::vector<double> values;
  std::vector<double> weights;
  std::function<double(std::size_t, const std::vector<std::size_t>&)> rate;
};

struct EnumerationTable {
  double mass = 0.0;
  std::vector<double> alpha;   // index k + 1, k = -1..L
  std::vector<double> lambda;  // index k + 1
  // cinf[k + 1][w][a]: a = 0..|A|-1 real values, a = |A| the cemetery; w
  // encodes value indices on ball(d, k) with the first offset least
  // significant.
  std::vector<std::vector<std::vector<double>>> cinf;
  std::vector<std::vector<std::vector<int>>> balls;  // index k + 1 (empty for k = -1)
};

inline EnumerationTable enumerate_decomposition(const FiniteSpec& spec, std::size_t budget = 10'000'000) {
  const std::size_t q = spec.values.size();
  if (q == 0 || spec.weights.size() != q) throw std::invalid_argument("bad finite spec");
  const auto full = ball(spec.d, spec.range);
  std::size_t states = 1;
  for (std::size_t n = 0; n < full.size(); ++n) {
    states *= q;
    if (states > budget) throw std::length_error("enumeration budget exceeded");
  }
  // rates[state][a]
  std::vector<std::vector<double>> rates(states, std::vector<double>(q));
  std::vector<double> totals(states);
  std::vector<std::size_t> cfg(full.size());
  double mass = 0.0;
  for (std::size_t s = 0; s < states; ++s) {
    std::size_t rest = s;
    for (auto& c : cfg) {
      c = rest % q;
      rest /= q;
    }
    double tot = 0.0;
    for (std::size_t a = 0; a < q; ++a) {
      rates[s][a] = spec.rate(a, cfg);
      tot += spec.weights[a] * rates[s][a];
    }
    totals[s] = tot;
    mass = std::max(mass, tot);
  }
  EnumerationTable t;
  t.mass = mass;
  for (int k = -1; k <= spec.range; ++k) {
    const auto inner = ball(spec.d, k);
    std::size_t inner_states = 1;
    for (std::size_t n = 0; n < inner.size(); ++n) inner_states *= q;
    // position in the full ball of each inner offset
    std::vector<std::size_t> pos;
    for (const auto& o : inner)
      pos.push_back(static_cast<std::size_t>(std::find(full.begin(), full.end(), o) - full.begin()));
    std::vector<std::vector<double>> table(inner_states,
                                           std::vector<double>(q + 1, std::numeric_limits<double>::infinity()));
    for (std::size_t s = 0; s < states; ++s) {
      std::size_t idx = 0, place = 1;
      for (std::size_t n = 0; n < pos.size(); ++n) {
        std::size_t digit = s;
        for (std::size_t m = 0; m < pos[n]; ++m) digit /= q;
        idx += (digit % q) * place;
        place *= q;
      }
      auto& row = table[idx];
      for (std::size_t a = 0; a < q; ++a) row[a] = std::min(row[a], rates[s][a]);
      row[q] = std::min(row[q], mass - totals[s]);
    }
    if (k < 0) table[0][q] = std::max(0.0, table[0][q]);
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& row : table) {
      double a = 0.0;
      for (std::size_t v = 0; v < q; ++v) a += spec.weights[v] * row[v];
      if (k >= 0) a += row[q];
      worst = std::min(worst, a);
    }
    t.alpha.push_back(worst);
    t.cinf.push_back(std::move(table));
    t.balls.push_back(inner);
  }
  for (std::size_t n = 0; n < t.alpha.size(); ++n)
    t.lambda.push_back((t.alpha[n] - (n ? t.alpha[n - 1] : 0.0)) / mass);
  return t;
}

// Nearest-neighbour Ising on {-1, +1}: c(a, eta) = exp(beta a (h + J sum_nn eta)).
inline FiniteSpec ising_spec(int d, double beta, double coupling, double field = 0.0) {
  FiniteSpec s;
  s.d = d;
  s.range = 1;
  s.values = {-1.0, 1.0};
  s.weights = {1.0, 1.0};
  const auto offs = ball(d, 1);
  s.rate = [=](std::size_t a, const std::vector<std::size_t>& cfg) {
    double h = field;
    for (std::size_t n = 0; n < offs.size(); ++n)
      if (norm1(offs[n]) == 1) h += coupling * (cfg[n] == 0 ? -1.0 : 1.0);
    const double spin = a == 0 ? -1.0 : 1.0;
    return std::exp(beta * spin * h);
  };
  return s;
}

// Ordered-pair chain for two nearest-neighbour Ising flip dynamics, values
// {(-,-), (-,+), (+,+)} as indices 0, 1, 2. Clock rate M = 2 exp(beta (2d J~ + h~)).
inline FiniteSpec ising_pair_spec(int d, double beta, double coupling, double coupling_upper, double field,
                                  double field_upper) {
  FiniteSpec s;
  s.d = d;
  s.range = 1;
  s.values = {-1.0, 0.0, 1.0};
  s.weights = {1.0, 1.0, 1.0};
  const auto offs = ball(d, 1);
  const double mass = 2.0 * std::exp(beta * (2.0 * d * coupling_upper + field_upper));
  s.rate = [=](std::size_t a, const std::vector<std::size_t>& cfg) {
    double hl = field, hu = field_upper;
    int own_l = 0, own_u = 0;
    for (std::size_t n = 0; n < offs.size(); ++n) {
      const int lo = cfg[n] == 2 ? 1 : -1;
      const int up = cfg[n] == 0 ? -1 : 1;
      if (norm1(offs[n]) == 0) {
        own_l = lo;
        own_u = up;
      } else {
        hl += coupling * lo;
        hu += coupling_upper * up;
      }
    }
    // P(new lower spin = +1), P(new upper spin = -1)
    const double flip_l = std::exp(-beta * own_l * hl) / mass;
    const double flip_u = std::exp(-beta * own_u * hu) / mass;
    const double up_plus = own_l < 0 ? flip_l : 1.0 - flip_l;
    const double down_minus = own_u > 0 ? flip_u : 1.0 - flip_u;
    const double probs[3] = {down_minus, 1.0 - up_plus - down_minus, up_plus};
    return mass * probs[a];
  };
  return s;
}

}  // namespace pssim::oracle

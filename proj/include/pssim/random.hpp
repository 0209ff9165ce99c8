#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>

namespace pssim {

// Seeded random stream. Uniforms are built from the top 53 bits of
// mt19937_64 so that draws do not depend on the standard library's
// distribution implementations.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    engine_.seed(seq);
  }

  // Independent stream for (seed, replica, lane).
  Stream(std::uint64_t seed, std::uint64_t replica, std::uint64_t lane) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replica), static_cast<std::uint32_t>(replica >> 32),
                      static_cast<std::uint32_t>(lane), 0x7073u};
    engine_.seed(seq);
  }

  std::uint64_t next() { return engine_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // (0, 1)
  double uniform_open() {
    double u;
    do u = uniform();
    while (u == 0.0);
    return u;
  }

  double exponential(double rate) { return -std::log(uniform_open()) / rate; }

  // Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

 private:
  std::mt19937_64 engine_;
};

// Lanes of the per-replica stream family.
enum class Lane : std::uint64_t { events = 0, clock = 1, initial = 2 };

inline Stream replica_stream(std::uint64_t seed, std::uint64_t replica, Lane lane = Lane::events) {
  return Stream(seed, replica, static_cast<std::uint64_t>(lane));
}

}  // namespace pssim

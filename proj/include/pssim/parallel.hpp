#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace pssim {

// Worker count: PSSIM_THREADS if set and positive, else the hardware count.
inline unsigned worker_count() {
  if (const char* env = std::getenv("PSSIM_THREADS")) {
    try {
      const long n = std::stol(env);
      if (n > 0) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Evaluates fn(r) for r = 0..n-1 across workers; results come back in
// replica order. The first exception thrown by any replica is rethrown.
template <class T, class Fn>
std::vector<T> run_replicas(std::size_t n, Fn&& fn, unsigned threads = worker_count()) {
  std::vector<T> out(n);
  threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t r = 0; r < n; ++r) out[r] = fn(r);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= n || failed.load()) return;
      try {
        out[r] = fn(r);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace pssim

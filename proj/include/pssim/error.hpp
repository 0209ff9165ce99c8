#pragma once

#include <stdexcept>
#include <string>

namespace pssim {

// Process exit codes shared by every command.
enum class ExitCode : int {
  ok = 0,
  failure = 1,
  invalid_config = 2,
  supercritical = 3,
  internal = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ExitCode::invalid_config, what) {}
};

struct SupercriticalError : Error {
  SupercriticalError(const std::string& what, double gamma)
      : Error(ExitCode::supercritical, what), gamma(gamma) {}
  double gamma;
};

// A violated internal invariant (mixture weights, ancestor coverage, coupled
// kernel sign). Aborts the replica.
struct InternalConsistencyError : Error {
  explicit InternalConsistencyError(const std::string& what) : Error(ExitCode::internal, what) {}
};

struct SamplerError : Error {
  explicit SamplerError(const std::string& what) : Error(ExitCode::internal, what) {}
};

// The lazily extended range ladder ran past the hard range cap.
struct RangeCapExceeded : Error {
  RangeCapExceeded(int cap, double bias_bound)
      : Error(ExitCode::internal, "range draw exceeded hard cap " + std::to_string(cap) +
                                      " (space-time bias bound " + std::to_string(bias_bound) + ")"),
        cap(cap),
        bias_bound(bias_bound) {}
  int cap;
  double bias_bound;
};

}  // namespace pssim

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace bifikle {

inline constexpr const char* kToolVersion = "0.1.0";

// Error hierarchy. Exit-code mapping lives in the CLI: config -> 2,
// data -> 3, numerical -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public DataError {
 public:
  using DataError::DataError;
};

class InsufficientData : public DataError {
 public:
  using DataError::DataError;
};

class IncompatibleGrids : public DataError {
 public:
  using DataError::DataError;
};

class PairingError : public DataError {
 public:
  using DataError::DataError;
};

class OutOfDomain : public DataError {
 public:
  using DataError::DataError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class DegenerateMode : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InstabilityError : public NumericalError {
 public:
  InstabilityError(const std::string& what, long step)
      : NumericalError(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

// External campaigns raise this when a proposed point has no ingested
// snapshot yet; the driver checkpoints and waits for new data.
class AwaitingData : public Error {
 public:
  using Error::Error;
};

// Counter-based generator: every draw hashes (key, counter) with the
// splitmix64 finalizer, so streams are stateless, portable, and cheap to
// derive per (seed, purpose, stage, replicate).
class Rng {
 public:
  static constexpr const char* kName = "splitmix64";

  explicit Rng(std::uint64_t key) : key_(key) {}

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t k = mix(seed);
    for (std::uint64_t t : tags) k = mix(k ^ mix(t + 0x632be59bd9b4e019ull));
    return Rng(k);
  }

  std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_); }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    // Modulo bias is < 2^-53 for the n used here (fold counts, strata).
    return next_u64() % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Radical-inverse Halton term; bases come from kHaltonPrimes. Used for the
// deterministic candidate sets in acquisition and GP multi-starts.
double halton_radical_inverse(std::uint64_t index, int base);
inline constexpr int kHaltonPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

// Worker cap shared by replicate- and batch-level parallelism:
// BIFIKLE_THREADS, else the configured value, else hardware concurrency.
int effective_threads(int configured = 0);

// Runs fn(i) for i in [0, n) on up to max_threads workers. Exceptions are
// rethrown (first one wins) after all workers join.
void parallel_for(int n, const std::function<void(int)>& fn, int max_threads);

}  // namespace bifikle

#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace atfm {

// Counter-based generator: the n-th output is a SplitMix64 finalisation of
// (key, n). Streams for (seed, scenario, flight, edge) are derived by hashing
// the path into the key, so no two workers ever share or coordinate state.
// Satisfies UniformRandomBitGenerator.
class RngState {
 public:
  using result_type = std::uint64_t;

  explicit RngState(std::uint64_t key = 0, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

  static RngState derive(std::uint64_t master_seed, std::initializer_list<std::uint64_t> path);

  result_type operator()();

  // Uniform on [0, 1) with 53 random bits.
  double uniform01();

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  friend bool operator==(const RngState&, const RngState&) = default;

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace atfm

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

namespace perspective {

/// Counter-based generator: output i is splitmix64(key + i * golden).
///
/// The full state is two 64-bit words, so it serializes trivially into
/// checkpoints and manifests. Independent streams are derived with split().
class Rng {
 public:
  using result_type = std::uint64_t;

  struct State {
    std::uint64_t key = 0;
    std::uint64_t counter = 0;
    bool operator==(const State&) const = default;
  };

  explicit Rng(std::uint64_t seed = 0) : state_{mix(seed ^ 0x5DEECE66DULL), 0} {}
  explicit Rng(State state) : state_(state) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }
  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Unbiased uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);
  /// Uniform real in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Derives an independent generator; does not advance this one.
  Rng split(std::uint64_t stream) const;

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  const State& state() const { return state_; }

  static std::uint64_t mix(std::uint64_t z);

 private:
  State state_;
};

}  // namespace perspective

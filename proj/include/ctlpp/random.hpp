#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace ctlpp {

/// Seeded pseudo-random stream used for every random decision in the generator.
///
/// The algorithm is xoshiro256** seeded through SplitMix64, and bounded
/// integers use rejection sampling on the high bits of a 64x64 multiply.
/// Neither the engine nor the reduction depends on the standard library's
/// implementation-defined distributions, so a given seed yields the same
/// sequence on every platform. The algorithm is part of the file format
/// contract: changing it changes every generated dataset.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t uniform_below(std::uint64_t bound);

  /// Uniform index in [0, size).
  int uniform_index(std::size_t size) { return static_cast<int>(uniform_below(size)); }

  /// Uniform real in [0, 1) with 53 random bits.
  double uniform_real();

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> state_;
};

/// One round of the SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed for the shard_index-th child stream of master_seed:
/// splitmix64(master_seed ^ splitmix64(shard_index + 0x9E3779B97F4A7C15)).
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t shard_index);

/// 64-bit FNV-1a, used for content hashes in manifests.
class Fnv1a {
 public:
  void update(std::string_view bytes);
  std::uint64_t digest() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

std::string hex64(std::uint64_t value);

}  // namespace ctlpp

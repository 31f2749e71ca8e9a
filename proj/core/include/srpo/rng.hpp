#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace srpo {

// 64-bit FNV-1a. Used for seed derivation tags and as the content checksum
// for checkpoints, manifests and golden-file comparisons.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Every random stream in the tool is derived from one master seed as
// derive_seed(master, tag, index). Tags name the purpose ("gen", "explore",
// "batch", ...), indices the unit of work, so adding a stream never shifts
// the draws of another.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index);

// mt19937_64 engine with our own draw helpers. The std::*_distribution
// algorithms are implementation-defined; these are not, which keeps golden
// files stable across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform in [0, n) by rejection; unbiased.
  std::uint64_t uniform_int(std::uint64_t n);

  // Index drawn proportionally to non-negative weights (not necessarily
  // normalized). Weights summing to zero are an error upstream.
  std::size_t categorical(std::span<const double> weights);

  // Symmetric uniform in [-range, range].
  double symmetric(double range) { return (2.0 * uniform() - 1.0) * range; }

  // Fisher-Yates over indices [0, n).
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace srpo

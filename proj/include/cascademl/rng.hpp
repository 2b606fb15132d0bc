#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace cml {

// Deterministic seedable random stream. The engine is std::mt19937_64 (whose
// output sequence is fully specified by the standard); all distribution
// transforms are implemented here so results are identical across standard
// library implementations.
//
// Streams are splittable: split(tag) derives an independent child stream from
// the parent's seed and the tag without consuming parent state, so the order
// in which children are created never changes any stream's output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1), 53-bit resolution.
  double uniform();

  // Standard normal via Box-Muller (second deviate cached).
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n), rejection-sampled to remove modulo bias.
  std::size_t uniform_index(std::size_t n);

  // Fisher-Yates shuffle.
  void shuffle(std::vector<std::size_t>& v);

  // Derived independent stream; does not consume parent state.
  Rng split(std::uint64_t tag_a, std::uint64_t tag_b = 0) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stream tags used to derive the per-purpose child streams of a training run.
namespace rng_tag {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t dropout = 2;
inline constexpr std::uint64_t shuffle = 3;
inline constexpr std::uint64_t rebalance = 4;
inline constexpr std::uint64_t boost = 5;
inline constexpr std::uint64_t labels = 6;
inline constexpr std::uint64_t noise = 7;
inline constexpr std::uint64_t flips = 8;
inline constexpr std::uint64_t split = 9;
inline constexpr std::uint64_t directions = 10;
}  // namespace rng_tag

}  // namespace cml

#include "cascademl/rng.hpp"

#include <cmath>
#include <numbers>

#include "cascademl/errors.hpp"

namespace cml {

namespace {

// splitmix64 finalizer; used both to scramble user seeds and to mix tags.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] so the log is finite.
  const double u1 =
      (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) {
    throw Error(ErrorKind::invalid_argument, "uniform_index: empty range");
  }
  const std::uint64_t limit =
      UINT64_MAX - (UINT64_MAX % static_cast<std::uint64_t>(n));
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x < limit) return static_cast<std::size_t>(x % n);
  }
}

void Rng::shuffle(std::vector<std::size_t>& v) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(i)]);
  }
}

Rng Rng::split(std::uint64_t tag_a, std::uint64_t tag_b) const {
  std::uint64_t child = mix64(seed_ ^ mix64(tag_a + 1));
  child = mix64(child ^ mix64(tag_b + 0x51ed2701));
  return Rng(child);
}

}  // namespace cml

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace cgate {

// splitmix64 finalizer; used to derive independent per-sample streams.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Seed for sample `index` of a stream seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

// Thin wrapper over mt19937_64. The distributions are written out by hand
// because the <random> ones are implementation-defined and we want the same
// bytes from every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();                       // N(0, 1), Box-Muller
  std::size_t below(std::size_t n);      // [0, n)

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cgate

#pragma once

#include "cgkasim/bytes.hpp"

#include <cstdint>
#include <memory>

namespace cgkasim {

// Every operation that needs entropy takes one of these explicitly, so a whole
// simulation can be replayed bit-for-bit from a single seed.
class RandomSource
{
public:
  virtual ~RandomSource() = default;

  virtual void fill(uint8_t* out, size_t len) = 0;

  Bytes bytes(size_t len);
  Secret secret();

  uint64_t u64();

  // Uniform integer in [lo, hi] (inclusive).
  uint64_t uniform_u64(uint64_t lo, uint64_t hi);

  // True with probability p (p in [0, 1]).
  bool chance(double p);

  // Uniform double in [lo, hi).
  double uniform_real(double lo, double hi);

  // Standard normal via Box-Muller.
  double normal();

  // Uniform index into a container of the given size (size must be > 0).
  size_t pick_index(size_t size);
};

// Entropy from the operating system.
class SystemRandom : public RandomSource
{
public:
  void fill(uint8_t* out, size_t len) override;
};

// Keyed-hash counter stream: identical output for identical seeds on every
// platform. Suitable for simulation, not for protecting real secrets.
class DeterministicRandom : public RandomSource
{
public:
  explicit DeterministicRandom(uint64_t seed);
  explicit DeterministicRandom(const Secret& seed);

  void fill(uint8_t* out, size_t len) override;

private:
  std::array<uint8_t, secret_size> _key;
  uint64_t _counter = 0;
  std::array<uint8_t, 64> _block{};
  size_t _block_used = 64;
};

// SplitMix64; used to derive independent per-client seeds from a scenario seed.
uint64_t splitmix64(uint64_t& state);

} // namespace cgkasim

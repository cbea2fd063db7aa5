#include "cgkasim/random.hpp"

#include "cgkasim/errors.hpp"

#include <cmath>
#include <cstring>
#include <sodium.h>

namespace cgkasim {

Bytes
RandomSource::bytes(size_t len)
{
  Bytes out(len);
  if (len > 0) {
    fill(out.data(), len);
  }
  return out;
}

Secret
RandomSource::secret()
{
  Secret s;
  fill(s.data.data(), s.data.size());
  return s;
}

uint64_t
RandomSource::u64()
{
  uint8_t buf[8];
  fill(buf, sizeof(buf));
  uint64_t v = 0;
  for (auto b : buf) {
    v = (v << 8) | b;
  }
  return v;
}

uint64_t
RandomSource::uniform_u64(uint64_t lo, uint64_t hi)
{
  if (lo > hi) {
    throw InvalidParameterError("uniform_u64 requires lo <= hi");
  }
  const uint64_t span = hi - lo;
  if (span == UINT64_MAX) {
    return u64();
  }
  // Rejection sampling to avoid modulo bias.
  const uint64_t bound = span + 1;
  const uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  while (true) {
    const uint64_t v = u64();
    if (v < limit) {
      return lo + (v % bound);
    }
  }
}

bool
RandomSource::chance(double p)
{
  if (p <= 0.0) {
    return false;
  }
  if (p >= 1.0) {
    return true;
  }
  return uniform_real(0.0, 1.0) < p;
}

double
RandomSource::uniform_real(double lo, double hi)
{
  // 53 random bits mapped to [0, 1).
  const double unit = static_cast<double>(u64() >> 11) * 0x1.0p-53;
  return lo + unit * (hi - lo);
}

double
RandomSource::normal()
{
  double u1 = uniform_real(0.0, 1.0);
  while (u1 == 0.0) {
    u1 = uniform_real(0.0, 1.0);
  }
  const double u2 = uniform_real(0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

size_t
RandomSource::pick_index(size_t size)
{
  if (size == 0) {
    throw InvalidParameterError("pick_index requires a non-empty range");
  }
  return static_cast<size_t>(uniform_u64(0, size - 1));
}

void
SystemRandom::fill(uint8_t* out, size_t len)
{
  randombytes_buf(out, len);
}

static std::array<uint8_t, secret_size>
expand_seed(uint64_t seed)
{
  uint8_t seed_bytes[8];
  for (int i = 7; i >= 0; i--) {
    seed_bytes[i] = static_cast<uint8_t>(seed & 0xff);
    seed >>= 8;
  }
  std::array<uint8_t, secret_size> key{};
  crypto_generichash(key.data(), key.size(), seed_bytes, sizeof(seed_bytes), nullptr, 0);
  return key;
}

DeterministicRandom::DeterministicRandom(uint64_t seed)
  : _key(expand_seed(seed))
{
}

DeterministicRandom::DeterministicRandom(const Secret& seed)
  : _key(seed.data)
{
}

void
DeterministicRandom::fill(uint8_t* out, size_t len)
{
  size_t produced = 0;
  while (produced < len) {
    if (_block_used == _block.size()) {
      uint8_t ctr[8];
      uint64_t c = _counter++;
      for (int i = 7; i >= 0; i--) {
        ctr[i] = static_cast<uint8_t>(c & 0xff);
        c >>= 8;
      }
      crypto_generichash(
        _block.data(), _block.size(), ctr, sizeof(ctr), _key.data(), _key.size());
      _block_used = 0;
    }
    const size_t take = std::min(len - produced, _block.size() - _block_used);
    std::memcpy(out + produced, _block.data() + _block_used, take);
    _block_used += take;
    produced += take;
  }
}

uint64_t
splitmix64(uint64_t& state)
{
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace cgkasim

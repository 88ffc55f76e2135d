#include "fouport/rng.hpp"

#include "fouport/numerics.hpp"

namespace fouport::rng {

namespace {

constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;
constexpr uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(uint32_t a, uint32_t b, uint32_t& hi, uint32_t& lo) {
  const uint64_t p = uint64_t(a) * uint64_t(b);
  hi = uint32_t(p >> 32);
  lo = uint32_t(p);
}

inline double u64_to_unit(uint64_t u) {
  // top 53 bits, centered in the bin: strictly inside (0, 1)
  return (double(u >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

void philox_block(const Philox4x32& in, uint32_t out[4]) {
  uint32_t c0 = in.c0, c1 = in.c1, c2 = in.c2, c3 = in.c3;
  uint32_t k0 = in.k0, k1 = in.k1;
  for (int round = 0; round < 10; ++round) {
    uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, c0, hi0, lo0);
    mulhilo(kPhiloxM1, c2, hi1, lo1);
    const uint32_t n0 = hi1 ^ c1 ^ k0;
    const uint32_t n1 = lo1;
    const uint32_t n2 = hi0 ^ c3 ^ k1;
    const uint32_t n3 = lo0;
    c0 = n0;
    c1 = n1;
    c2 = n2;
    c3 = n3;
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  out[0] = c0;
  out[1] = c1;
  out[2] = c2;
  out[3] = c3;
}

NormalStream::NormalStream(uint64_t seed, StreamClass cls, uint64_t path_id, uint32_t salt) {
  base_.k0 = uint32_t(seed);
  base_.k1 = uint32_t(seed >> 32);
  base_.c0 = 0;  // per-block counter, set on refill
  base_.c1 = uint32_t(path_id);
  base_.c2 = uint32_t(path_id >> 32) ^ (uint32_t(cls) << 24);
  base_.c3 = salt;
}

void NormalStream::refill() {
  Philox4x32 in = base_;
  in.c0 = uint32_t(idx_ / 2);
  uint32_t r[4];
  philox_block(in, r);
  const uint64_t u0 = (uint64_t(r[0]) << 32) | r[1];
  const uint64_t u1 = (uint64_t(r[2]) << 32) | r[3];
  buf_[0] = num::inv_normal_cdf(u64_to_unit(u0));
  buf_[1] = num::inv_normal_cdf(u64_to_unit(u1));
  cached_block_ = idx_ / 2;
}

double NormalStream::next() {
  if (idx_ / 2 != cached_block_) refill();
  return buf_[idx_++ % 2];
}

void NormalStream::seek(uint64_t draw_index) { idx_ = draw_index; }

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace fouport::rng

#pragma once
// Counter-based random streams (Philox4x32-10). Every draw is addressed by
// (seed, stream id, path id, draw index), so path simulation is a pure
// function of its coordinates and results do not depend on thread layout.
#include <cstdint>

namespace fouport::rng {

struct Philox4x32 {
  uint32_t c0, c1, c2, c3;  // counter
  uint32_t k0, k1;          // key
};

// One 10-round Philox block; fills out[0..3].
void philox_block(const Philox4x32& in, uint32_t out[4]);

// Stream classes; kept stable because they are part of the reproducibility
// contract (seed + coordinates fully determine every experiment output).
enum class StreamClass : uint32_t {
  history_wy = 0,
  future_wy = 1,
  future_wperp = 2,
};

// Gaussian stream: draws N(0,1) variates by inverse CDF from 64-bit uniforms.
// Two normals per Philox block; `index()` addressing allows random access.
class NormalStream {
 public:
  NormalStream(uint64_t seed, StreamClass cls, uint64_t path_id, uint32_t salt = 0);

  double next();
  // Jump to an absolute draw index (used when re-opening a stream mid-path).
  void seek(uint64_t draw_index);
  uint64_t index() const { return idx_; }

 private:
  void refill();
  Philox4x32 base_;
  uint64_t idx_ = 0;
  uint64_t cached_block_ = ~uint64_t(0);
  double buf_[2] = {0.0, 0.0};
};

// SplitMix64; used to derive per-omega master seeds from (seed, omega_id).
uint64_t mix_seed(uint64_t seed, uint64_t salt);

}  // namespace fouport::rng

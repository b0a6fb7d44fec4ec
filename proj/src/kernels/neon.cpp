#include "kernels_internal.hpp"

#include <arm_neon.h>

namespace ckagg::kernels::detail {

namespace {

// NEON has no 64x64 multiply either; build it from 32-bit halves.
inline uint64x2_t mullo_u64(uint64x2_t a, uint64_t b) {
  const uint32x2_t a_lo = vmovn_u64(a);
  const uint32x2_t a_hi = vshrn_n_u64(a, 32);
  const uint32x2_t b_lo = vdup_n_u32(static_cast<uint32_t>(b));
  const uint32x2_t b_hi = vdup_n_u32(static_cast<uint32_t>(b >> 32));
  const uint64x2_t lo = vmull_u32(a_lo, b_lo);
  const uint64x2_t cross = vaddq_u64(vmull_u32(a_hi, b_lo), vmull_u32(a_lo, b_hi));
  return vaddq_u64(lo, vshlq_n_u64(cross, 32));
}

inline uint64x2_t mix(uint64x2_t z) {
  z = veorq_u64(z, vshrq_n_u64(z, 30));
  z = mullo_u64(z, kMixMul1);
  z = veorq_u64(z, vshrq_n_u64(z, 27));
  z = mullo_u64(z, kMixMul2);
  z = veorq_u64(z, vshrq_n_u64(z, 31));
  return z;
}

}  // namespace

void neon_content_words(uint64_t key, uint64_t first_word, uint64_t* out, size_t n) {
  const uint64_t base = key + (first_word + 1) * kGoldenStep;
  uint64x2_t state = vcombine_u64(vcreate_u64(base), vcreate_u64(base + kGoldenStep));
  const uint64x2_t step = vdupq_n_u64(2 * kGoldenStep);
  size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_u64(out + i, mix(state));
    state = vaddq_u64(state, step);
  }
  if (i < n) scalar_content_words(key, first_word + i, out + i, n - i);
}

size_t neon_first_mismatch(const uint8_t* a, const uint8_t* b, size_t n) {
  size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const uint8x16_t eq = vceqq_u8(vld1q_u8(a + i), vld1q_u8(b + i));
    if (vminvq_u8(eq) != 0xff) break;
  }
  return i + scalar_first_mismatch(a + i, b + i, n - i);
}

uint64_t neon_exclusive_scan(const uint64_t* in, uint64_t* out, size_t n) {
  uint64_t running = 0;
  size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const uint64x2_t x = vld1q_u64(in + i);
    // [running, running + x0]
    const uint64x2_t shifted = vextq_u64(vdupq_n_u64(0), x, 1);
    const uint64x2_t exclusive = vaddq_u64(shifted, vdupq_n_u64(running));
    vst1q_u64(out + i, exclusive);
    running = vgetq_lane_u64(exclusive, 1) + vgetq_lane_u64(x, 1);
  }
  for (; i < n; ++i) {
    const uint64_t v = in[i];
    out[i] = running;
    running += v;
  }
  return running;
}

}  // namespace ckagg::kernels::detail

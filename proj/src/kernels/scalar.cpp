#include "kernels_internal.hpp"

#include <cstring>

namespace ckagg::kernels::detail {

namespace {

inline uint64_t mix(uint64_t z) {
  z ^= z >> 30;
  z *= kMixMul1;
  z ^= z >> 27;
  z *= kMixMul2;
  z ^= z >> 31;
  return z;
}

}  // namespace

void scalar_content_words(uint64_t key, uint64_t first_word, uint64_t* out, size_t n) {
  uint64_t state = key + (first_word + 1) * kGoldenStep;
  for (size_t i = 0; i < n; ++i) {
    out[i] = mix(state);
    state += kGoldenStep;
  }
}

size_t scalar_first_mismatch(const uint8_t* a, const uint8_t* b, size_t n) {
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    uint64_t x, y;
    std::memcpy(&x, a + i, 8);
    std::memcpy(&y, b + i, 8);
    if (x != y) break;
  }
  for (; i < n; ++i) {
    if (a[i] != b[i]) return i;
  }
  return n;
}

uint64_t scalar_exclusive_scan(const uint64_t* in, uint64_t* out, size_t n) {
  uint64_t running = 0;
  for (size_t i = 0; i < n; ++i) {
    const uint64_t v = in[i];
    out[i] = running;
    running += v;
  }
  return running;
}

}  // namespace ckagg::kernels::detail

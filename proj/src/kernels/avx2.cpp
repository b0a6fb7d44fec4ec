#include "kernels_internal.hpp"

#include <immintrin.h>

namespace ckagg::kernels::detail {

namespace {

// Low 64 bits of a 64x64 product; AVX2 has no native epi64 multiply.
inline __m256i mullo_epi64(__m256i a, __m256i b) {
  const __m256i lo = _mm256_mul_epu32(a, b);
  const __m256i a_hi = _mm256_srli_epi64(a, 32);
  const __m256i b_hi = _mm256_srli_epi64(b, 32);
  const __m256i cross = _mm256_add_epi64(_mm256_mul_epu32(a_hi, b), _mm256_mul_epu32(a, b_hi));
  return _mm256_add_epi64(lo, _mm256_slli_epi64(cross, 32));
}

inline __m256i mix(__m256i z) {
  const __m256i m1 = _mm256_set1_epi64x(static_cast<long long>(kMixMul1));
  const __m256i m2 = _mm256_set1_epi64x(static_cast<long long>(kMixMul2));
  z = _mm256_xor_si256(z, _mm256_srli_epi64(z, 30));
  z = mullo_epi64(z, m1);
  z = _mm256_xor_si256(z, _mm256_srli_epi64(z, 27));
  z = mullo_epi64(z, m2);
  z = _mm256_xor_si256(z, _mm256_srli_epi64(z, 31));
  return z;
}

}  // namespace

void avx2_content_words(uint64_t key, uint64_t first_word, uint64_t* out, size_t n) {
  const uint64_t base = key + (first_word + 1) * kGoldenStep;
  __m256i state = _mm256_set_epi64x(static_cast<long long>(base + 3 * kGoldenStep),
                                    static_cast<long long>(base + 2 * kGoldenStep),
                                    static_cast<long long>(base + kGoldenStep),
                                    static_cast<long long>(base));
  const __m256i step = _mm256_set1_epi64x(static_cast<long long>(4 * kGoldenStep));
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i), mix(state));
    state = _mm256_add_epi64(state, step);
  }
  if (i < n) scalar_content_words(key, first_word + i, out + i, n - i);
}

size_t avx2_first_mismatch(const uint8_t* a, const uint8_t* b, size_t n) {
  size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    const __m256i x = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    const __m256i y = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    const unsigned eq = static_cast<unsigned>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(x, y)));
    if (eq != 0xffffffffu) return i + static_cast<size_t>(__builtin_ctz(~eq));
  }
  return i + scalar_first_mismatch(a + i, b + i, n - i);
}

uint64_t avx2_exclusive_scan(const uint64_t* in, uint64_t* out, size_t n) {
  const __m256i zero = _mm256_setzero_si256();
  __m256i carry = zero;
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256i x = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(in + i));
    // [0, x0, x1, x2]
    __m256i s1 = _mm256_permute4x64_epi64(x, _MM_SHUFFLE(2, 1, 0, 0));
    s1 = _mm256_blend_epi32(s1, zero, 0x03);
    const __m256i y = _mm256_add_epi64(x, s1);
    // [0, 0, y0, y1]
    const __m256i s2 = _mm256_permute2x128_si256(y, y, 0x08);
    const __m256i inclusive = _mm256_add_epi64(y, s2);
    const __m256i exclusive = _mm256_sub_epi64(inclusive, x);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i), _mm256_add_epi64(exclusive, carry));
    carry = _mm256_add_epi64(carry, _mm256_permute4x64_epi64(inclusive, _MM_SHUFFLE(3, 3, 3, 3)));
  }
  uint64_t running = static_cast<uint64_t>(_mm256_extract_epi64(carry, 0));
  for (; i < n; ++i) {
    const uint64_t v = in[i];
    out[i] = running;
    running += v;
  }
  return running;
}

}  // namespace ckagg::kernels::detail

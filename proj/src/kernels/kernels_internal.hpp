#pragma once

// Only C headers here: neon.cpp is also syntax-checked by a freestanding
// cross compiler.
#include <stddef.h>
#include <stdint.h>

namespace ckagg::kernels::detail {

void scalar_content_words(uint64_t key, uint64_t first_word, uint64_t* out, size_t n);
size_t scalar_first_mismatch(const uint8_t* a, const uint8_t* b, size_t n);
uint64_t scalar_exclusive_scan(const uint64_t* in, uint64_t* out, size_t n);

#if defined(__x86_64__) || defined(_M_X64)
void avx2_content_words(uint64_t key, uint64_t first_word, uint64_t* out, size_t n);
size_t avx2_first_mismatch(const uint8_t* a, const uint8_t* b, size_t n);
uint64_t avx2_exclusive_scan(const uint64_t* in, uint64_t* out, size_t n);
#endif

#if defined(__aarch64__)
void neon_content_words(uint64_t key, uint64_t first_word, uint64_t* out, size_t n);
size_t neon_first_mismatch(const uint8_t* a, const uint8_t* b, size_t n);
uint64_t neon_exclusive_scan(const uint64_t* in, uint64_t* out, size_t n);
#endif

inline constexpr uint64_t kMixMul1 = 0xbf58476d1ce4e5b9ULL;
inline constexpr uint64_t kMixMul2 = 0x94d049bb133111ebULL;
inline constexpr uint64_t kGoldenStep = 0x9e3779b97f4a7c15ULL;

}  // namespace ckagg::kernels::detail

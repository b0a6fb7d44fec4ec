#pragma once

// Data-parallel inner loops with a scalar reference and vectorized variants
// (AVX2 on x86-64, NEON on AArch64). The variant is chosen once at runtime
// from CPU features; CKAGG_ISA=scalar|avx2|neon in the environment pins it.
// Every variant must be bit-identical to the scalar reference.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace ckagg::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view to_string(Isa isa);

struct KernelTable {
  Isa isa;
  // out[i] = content word (first_word + i) of the stream keyed by key.
  void (*content_words)(std::uint64_t key, std::uint64_t first_word, std::uint64_t* out, std::size_t n);
  // Index of the first differing byte, n when equal.
  std::size_t (*first_mismatch)(const std::uint8_t* a, const std::uint8_t* b, std::size_t n);
  // Exclusive scan modulo 2^64; returns the wrapped total.
  std::uint64_t (*exclusive_scan)(const std::uint64_t* in, std::uint64_t* out, std::size_t n);
};

/// Variants compiled in and supported by this CPU; scalar is always first.
std::vector<Isa> available();

/// nullptr when the variant is not usable here.
const KernelTable* table_for(Isa isa);

/// The dispatched table.
const KernelTable& active();

/// Pins the dispatched variant for the lifetime of the object (tests).
class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa);
  ~ScopedIsa();
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  const KernelTable* previous_;
};

// splitmix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline void content_words(std::uint64_t key, std::uint64_t first_word, std::span<std::uint64_t> out) {
  active().content_words(key, first_word, out.data(), out.size());
}

inline std::size_t first_mismatch(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  const std::size_t n = a.size() < b.size() ? a.size() : b.size();
  return active().first_mismatch(a.data(), b.data(), n);
}

}  // namespace ckagg::kernels

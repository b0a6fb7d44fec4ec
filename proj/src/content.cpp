#include "ckagg/content.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>

#include "ckagg/kernels.hpp"

namespace ckagg {

namespace {

constexpr std::size_t kBlockWords = 512;

void store_le(std::uint64_t word, std::uint8_t* dst, std::size_t from, std::size_t count) {
  if constexpr (std::endian::native == std::endian::big) word = __builtin_bswap64(word);
  std::uint8_t bytes[8];
  std::memcpy(bytes, &word, 8);
  std::memcpy(dst, bytes + from, count);
}

}  // namespace

std::uint64_t content_key(std::uint64_t seed, RankId rank) {
  return kernels::mix64(seed ^ kernels::mix64(static_cast<std::uint64_t>(rank) ^ kernels::kGolden));
}

void fill_content(std::uint64_t seed, RankId rank, Bytes offset, std::span<std::uint8_t> out) {
  if (out.empty()) return;
  const std::uint64_t key = content_key(seed, rank);
  std::array<std::uint64_t, kBlockWords> words;

  std::uint8_t* dst = out.data();
  std::size_t remaining = out.size();
  std::uint64_t word = offset / 8;
  std::size_t skip = static_cast<std::size_t>(offset % 8);

  while (remaining > 0) {
    const std::size_t want_bytes = std::min(remaining + skip, kBlockWords * 8);
    const std::size_t n_words = (want_bytes + 7) / 8;
    kernels::content_words(key, word, std::span(words.data(), n_words));
    if constexpr (std::endian::native == std::endian::little) {
      const std::size_t take = std::min(remaining, n_words * 8 - skip);
      std::memcpy(dst, reinterpret_cast<const std::uint8_t*>(words.data()) + skip, take);
      dst += take;
      remaining -= take;
    } else {
      for (std::size_t w = 0; w < n_words && remaining > 0; ++w) {
        const std::size_t take = std::min<std::size_t>(remaining, 8 - skip);
        store_le(words[w], dst, skip, take);
        dst += take;
        remaining -= take;
        skip = 0;
      }
    }
    skip = 0;
    word += n_words;
  }
}

std::vector<std::uint8_t> generate_content(std::uint64_t seed, RankId rank, Bytes size) {
  std::vector<std::uint8_t> out(size);
  fill_content(seed, rank, 0, out);
  return out;
}

}  // namespace ckagg

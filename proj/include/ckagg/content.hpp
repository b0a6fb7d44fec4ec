#pragma once

// Deterministic synthetic checkpoint content. Byte p of rank r's stream is
// byte (p mod 8), little-endian, of word floor(p / 8) of a counter-mode
// splitmix64 stream keyed by (seed, rank). Any sub-range can be regenerated
// without producing the bytes before it.

#include <cstdint>
#include <span>
#include <vector>

#include "ckagg/model.hpp"

namespace ckagg {

std::uint64_t content_key(std::uint64_t seed, RankId rank);

/// Writes bytes [offset, offset + out.size()) of the stream into out.
void fill_content(std::uint64_t seed, RankId rank, Bytes offset, std::span<std::uint8_t> out);

std::vector<std::uint8_t> generate_content(std::uint64_t seed, RankId rank, Bytes size);

}  // namespace ckagg

#include "ckagg/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_internal.hpp"

namespace ckagg::kernels {

namespace {

constexpr KernelTable kScalar{Isa::scalar, detail::scalar_content_words, detail::scalar_first_mismatch,
                              detail::scalar_exclusive_scan};

#if defined(__x86_64__) || defined(_M_X64)
constexpr KernelTable kAvx2{Isa::avx2, detail::avx2_content_words, detail::avx2_first_mismatch,
                            detail::avx2_exclusive_scan};
#endif

#if defined(__aarch64__)
constexpr KernelTable kNeon{Isa::neon, detail::neon_content_words, detail::neon_first_mismatch,
                            detail::neon_exclusive_scan};
#endif

const KernelTable* detect() {
  if (const char* forced = std::getenv("CKAGG_ISA")) {
    const std::string name(forced);
    for (Isa isa : available()) {
      if (to_string(isa) == name) return table_for(isa);
    }
  }
  const auto isas = available();
  return table_for(isas.back());
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

const KernelTable* table_for(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return &kScalar;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      if (__builtin_cpu_supports("avx2")) return &kAvx2;
#endif
      return nullptr;
    case Isa::neon:
#if defined(__aarch64__)
      return &kNeon;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

std::vector<Isa> available() {
  std::vector<Isa> out{Isa::scalar};
  for (Isa isa : {Isa::avx2, Isa::neon}) {
    if (table_for(isa) != nullptr) out.push_back(isa);
  }
  return out;
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

ScopedIsa::ScopedIsa(Isa isa) : previous_(&active()) {
  const KernelTable* table = table_for(isa);
  if (table == nullptr) table = &kScalar;
  current().store(table, std::memory_order_release);
}

ScopedIsa::~ScopedIsa() { current().store(previous_, std::memory_order_release); }

}  // namespace ckagg::kernels

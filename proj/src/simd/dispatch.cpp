#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_internal.hpp"
#include "trajpred/error.hpp"

namespace trajpred::simd {
namespace {

bool cpu_has_avx2() {
#if defined(TRAJPRED_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* pick_default() {
    const KernelTable* best = avx2_kernels();
    if (!best) best = &scalar_kernels();
    if (const char* forced = std::getenv("TRAJPRED_ISA")) {
        const std::string want(forced);
        if (want == "scalar") return &scalar_kernels();
        if (want == "avx2" && avx2_kernels()) return avx2_kernels();
    }
    return best;
}

std::atomic<const KernelTable*>& active_slot() {
    static std::atomic<const KernelTable*> slot{pick_default()};
    return slot;
}

}  // namespace

std::string_view to_string(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
    }
    return "unknown";
}

const KernelTable& scalar_kernels() { return detail::scalar_table(); }

const KernelTable* avx2_kernels() {
#if defined(TRAJPRED_HAVE_AVX2)
    static const bool supported = cpu_has_avx2();
    return supported ? &detail::avx2_table() : nullptr;
#else
    return nullptr;
#endif
}

bool available(Isa isa) { return isa == Isa::scalar || (isa == Isa::avx2 && avx2_kernels() != nullptr); }

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

void set_active(Isa isa) {
    if (!available(isa)) fail(ErrorCode::InvalidArgument, "instruction set not available: " + std::string(to_string(isa)));
    active_slot().store(isa == Isa::scalar ? &scalar_kernels() : avx2_kernels(), std::memory_order_release);
}

}  // namespace trajpred::simd

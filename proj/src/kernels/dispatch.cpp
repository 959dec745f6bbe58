#include "cpaem/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace cpaem::kernels {
namespace {

Isa detect() noexcept {
    if (const char* env = std::getenv("CPAEM_SIMD"); env != nullptr && std::strcmp(env, "scalar") == 0)
        return Isa::Scalar;
    return isa_supported(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<int> g_forced{-1};

}  // namespace

bool isa_supported(Isa isa) noexcept {
    if (isa == Isa::Scalar) return true;
#if defined(CPAEM_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Table& table(Isa isa) {
    return isa == Isa::Avx2 && isa_supported(Isa::Avx2) ? avx2::kTable : scalar::kTable;
}

Isa active_isa() noexcept {
    static const Isa detected = detect();
    const int forced = g_forced.load(std::memory_order_relaxed);
    return forced < 0 ? detected : static_cast<Isa>(forced);
}

void force_isa(Isa isa) noexcept {
    g_forced.store(static_cast<int>(isa_supported(isa) ? isa : Isa::Scalar));
}

const char* isa_name(Isa isa) noexcept { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

}  // namespace cpaem::kernels

#pragma once

// Batched inner loops used by the Monte-Carlo and quadrature oracles.
//
// Every kernel has a portable scalar reference and an AVX2/FMA variant; the
// variant is chosen once at runtime from CPUID (override with the environment
// variable CPAEM_SIMD=scalar). Batches are stored structure-of-arrays: a
// "dim x batch" buffer holds coordinate d of sample j at [d * batch + j].

#include <cstddef>
#include <cstdint>

namespace cpaem::kernels {

enum class Isa { Scalar, Avx2 };

/// Activation kinds understood by activate_batch; values match ActivationKind.
enum class Act : int { Identity = 0, Relu = 1, LeakyRelu = 2, Abs = 3 };

struct Table {
    /// out[r, j] = bias[r] + sum_c w[r, c] * in[c, j]; w is row-major rows x cols.
    void (*dense_batch)(const double* w, const double* bias, std::size_t rows, std::size_t cols,
                        const double* in, double* out, std::size_t batch);
    /// In-place pointwise activation over n contiguous values.
    void (*activate_batch)(Act kind, double eta, double* data, std::size_t n);
    /// out[j] = || L * r_j ||^2 with L lower-triangular (row-major dim x dim)
    /// and r_j column j of the dim x batch buffer `resid`.
    void (*whitened_sqnorm_batch)(const double* l, std::size_t dim, const double* resid,
                                  double* out, std::size_t batch);
    /// mask[j] = 1 iff normals[f] . p_j <= offsets[f] + tol for every face f;
    /// normals row-major faces x dim, pts dim x batch.
    void (*halfspace_mask_batch)(const double* normals, const double* offsets, std::size_t faces,
                                 std::size_t dim, const double* pts, double tol,
                                 std::uint8_t* mask, std::size_t batch);
};

bool isa_supported(Isa isa) noexcept;
const Table& table(Isa isa);

/// The ISA selected for this process (CPU support + CPAEM_SIMD override).
Isa active_isa() noexcept;
/// Pins the active ISA; falls back to Scalar when the CPU lacks support.
void force_isa(Isa isa) noexcept;
const char* isa_name(Isa isa) noexcept;

inline const Table& active() { return table(active_isa()); }

namespace scalar {
extern const Table kTable;
}
namespace avx2 {
extern const Table kTable;
}

}  // namespace cpaem::kernels

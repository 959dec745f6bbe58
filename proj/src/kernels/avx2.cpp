#include "cpaem/kernels.hpp"

#if defined(CPAEM_HAVE_AVX2_TU)

#include <immintrin.h>

#include <cmath>

namespace cpaem::kernels::avx2 {
namespace {

constexpr std::size_t kLanes = 4;

void dense_batch(const double* w, const double* bias, std::size_t rows, std::size_t cols,
                 const double* in, double* out, std::size_t batch) {
    const std::size_t vec_end = batch - batch % kLanes;
    for (std::size_t r = 0; r < rows; ++r) {
        double* o = out + r * batch;
        const double* wr = w + r * cols;
        std::size_t j = 0;
        for (; j < vec_end; j += kLanes) {
            __m256d acc = _mm256_set1_pd(bias[r]);
            for (std::size_t c = 0; c < cols; ++c)
                acc = _mm256_fmadd_pd(_mm256_set1_pd(wr[c]), _mm256_loadu_pd(in + c * batch + j), acc);
            _mm256_storeu_pd(o + j, acc);
        }
        for (; j < batch; ++j) {
            double acc = bias[r];
            for (std::size_t c = 0; c < cols; ++c) acc = std::fma(wr[c], in[c * batch + j], acc);
            o[j] = acc;
        }
    }
}

void activate_batch(Act kind, double eta, double* data, std::size_t n) {
    if (kind == Act::Identity) return;
    const std::size_t vec_end = n - n % kLanes;
    const __m256d zero = _mm256_setzero_pd();
    const __m256d slope = _mm256_set1_pd(eta);
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    std::size_t i = 0;
    for (; i < vec_end; i += kLanes) {
        __m256d v = _mm256_loadu_pd(data + i);
        switch (kind) {
            case Act::Relu: {
                const __m256d keep = _mm256_cmp_pd(v, zero, _CMP_GE_OQ);
                v = _mm256_and_pd(v, keep);
                break;
            }
            case Act::LeakyRelu: {
                const __m256d keep = _mm256_cmp_pd(v, zero, _CMP_GE_OQ);
                v = _mm256_blendv_pd(_mm256_mul_pd(v, slope), v, keep);
                break;
            }
            case Act::Abs:
                v = _mm256_andnot_pd(sign_mask, v);
                break;
            case Act::Identity:
                break;
        }
        _mm256_storeu_pd(data + i, v);
    }
    for (; i < n; ++i) {
        switch (kind) {
            case Act::Relu: data[i] = data[i] >= 0.0 ? data[i] : 0.0; break;
            case Act::LeakyRelu: data[i] = data[i] >= 0.0 ? data[i] : eta * data[i]; break;
            case Act::Abs: data[i] = std::fabs(data[i]); break;
            case Act::Identity: break;
        }
    }
}

void whitened_sqnorm_batch(const double* l, std::size_t dim, const double* resid, double* out,
                           std::size_t batch) {
    const std::size_t vec_end = batch - batch % kLanes;
    std::size_t j = 0;
    for (; j < vec_end; j += kLanes) {
        __m256d total = _mm256_setzero_pd();
        for (std::size_t r = 0; r < dim; ++r) {
            __m256d acc = _mm256_setzero_pd();
            for (std::size_t c = 0; c <= r; ++c)
                acc = _mm256_fmadd_pd(_mm256_set1_pd(l[r * dim + c]),
                                      _mm256_loadu_pd(resid + c * batch + j), acc);
            total = _mm256_fmadd_pd(acc, acc, total);
        }
        _mm256_storeu_pd(out + j, total);
    }
    for (; j < batch; ++j) {
        double total = 0.0;
        for (std::size_t r = 0; r < dim; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c <= r; ++c) acc = std::fma(l[r * dim + c], resid[c * batch + j], acc);
            total = std::fma(acc, acc, total);
        }
        out[j] = total;
    }
}

void halfspace_mask_batch(const double* normals, const double* offsets, std::size_t faces,
                          std::size_t dim, const double* pts, double tol, std::uint8_t* mask,
                          std::size_t batch) {
    const std::size_t vec_end = batch - batch % kLanes;
    std::size_t j = 0;
    for (; j < vec_end; j += kLanes) {
        __m256d outside = _mm256_setzero_pd();
        for (std::size_t f = 0; f < faces; ++f) {
            __m256d acc = _mm256_setzero_pd();
            for (std::size_t d = 0; d < dim; ++d)
                acc = _mm256_fmadd_pd(_mm256_set1_pd(normals[f * dim + d]),
                                      _mm256_loadu_pd(pts + d * batch + j), acc);
            outside = _mm256_or_pd(outside, _mm256_cmp_pd(acc, _mm256_set1_pd(offsets[f] + tol), _CMP_GT_OQ));
        }
        const int bits = _mm256_movemask_pd(outside);
        for (std::size_t k = 0; k < kLanes; ++k) mask[j + k] = ((bits >> k) & 1) ? 0 : 1;
    }
    for (; j < batch; ++j) {
        std::uint8_t inside = 1;
        for (std::size_t f = 0; f < faces; ++f) {
            double acc = 0.0;
            for (std::size_t d = 0; d < dim; ++d) acc = std::fma(normals[f * dim + d], pts[d * batch + j], acc);
            if (acc > offsets[f] + tol) inside = 0;
        }
        mask[j] = inside;
    }
}

}  // namespace

const Table kTable{dense_batch, activate_batch, whitened_sqnorm_batch, halfspace_mask_batch};

}  // namespace cpaem::kernels::avx2

#else

namespace cpaem::kernels::avx2 {
const Table kTable = scalar::kTable;
}

#endif

#include "cpaem/kernels.hpp"

#include <cmath>

namespace cpaem::kernels::scalar {
namespace {

void dense_batch(const double* w, const double* bias, std::size_t rows, std::size_t cols,
                 const double* in, double* out, std::size_t batch) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* o = out + r * batch;
        for (std::size_t j = 0; j < batch; ++j) o[j] = bias[r];
        for (std::size_t c = 0; c < cols; ++c) {
            const double wrc = w[r * cols + c];
            const double* x = in + c * batch;
            for (std::size_t j = 0; j < batch; ++j) o[j] += wrc * x[j];
        }
    }
}

void activate_batch(Act kind, double eta, double* data, std::size_t n) {
    switch (kind) {
        case Act::Identity:
            return;
        case Act::Relu:
            for (std::size_t i = 0; i < n; ++i) data[i] = data[i] >= 0.0 ? data[i] : 0.0;
            return;
        case Act::LeakyRelu:
            for (std::size_t i = 0; i < n; ++i) data[i] = data[i] >= 0.0 ? data[i] : eta * data[i];
            return;
        case Act::Abs:
            for (std::size_t i = 0; i < n; ++i) data[i] = std::fabs(data[i]);
            return;
    }
}

void whitened_sqnorm_batch(const double* l, std::size_t dim, const double* resid, double* out,
                           std::size_t batch) {
    for (std::size_t j = 0; j < batch; ++j) out[j] = 0.0;
    for (std::size_t r = 0; r < dim; ++r) {
        for (std::size_t j = 0; j < batch; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c <= r; ++c) acc += l[r * dim + c] * resid[c * batch + j];
            out[j] += acc * acc;
        }
    }
}

void halfspace_mask_batch(const double* normals, const double* offsets, std::size_t faces,
                          std::size_t dim, const double* pts, double tol, std::uint8_t* mask,
                          std::size_t batch) {
    for (std::size_t j = 0; j < batch; ++j) mask[j] = 1;
    for (std::size_t f = 0; f < faces; ++f) {
        const double bound = offsets[f] + tol;
        for (std::size_t j = 0; j < batch; ++j) {
            double acc = 0.0;
            for (std::size_t d = 0; d < dim; ++d) acc += normals[f * dim + d] * pts[d * batch + j];
            if (acc > bound) mask[j] = 0;
        }
    }
}

}  // namespace

const Table kTable{dense_batch, activate_batch, whitened_sqnorm_batch, halfspace_mask_batch};

}  // namespace cpaem::kernels::scalar

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <string_view>

namespace cpaem {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Symmetric positive-definite matrix with its Cholesky factor, inverse and
/// log-determinant cached at construction.
class SpdMatrix {
public:
    SpdMatrix() = default;
    /// Throws NumericalError when `m` is not symmetric positive definite.
    explicit SpdMatrix(const Mat& m, std::string_view what = "matrix");

    const Mat& matrix() const noexcept { return m_; }
    const Mat& inverse() const noexcept { return inv_; }
    /// Lower-triangular L with matrix() = L L^T.
    const Mat& cholesky() const noexcept { return chol_; }
    /// Lower-triangular L^{-1}; ||L^{-1} r||^2 is the Mahalanobis form.
    const Mat& inverse_cholesky() const noexcept { return inv_chol_; }
    double log_det() const noexcept { return log_det_; }
    Eigen::Index dim() const noexcept { return m_.rows(); }

private:
    Mat m_, inv_, chol_, inv_chol_;
    double log_det_ = 0.0;
};

/// Symmetrizes, then raises eigenvalues below `floor` to `floor`. Returns the
/// number of eigenvalues that were raised.
int eigen_floor(Mat& m, double floor);

}  // namespace cpaem

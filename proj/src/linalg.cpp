#include "cpaem/linalg.hpp"

#include "cpaem/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace cpaem {

SpdMatrix::SpdMatrix(const Mat& m, std::string_view what) : m_(m) {
    if (m.rows() != m.cols() || m.rows() == 0)
        throw InputError(std::string(what) + ": expected a non-empty square matrix");
    if (!m.allFinite()) throw NumericalError(std::string(what) + ": non-finite entries");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw NumericalError(std::string(what) + ": not symmetric");
    m_ = 0.5 * (m + m.transpose());
    Eigen::LLT<Mat> llt(m_);
    if (llt.info() != Eigen::Success) throw NumericalError(std::string(what) + ": not positive definite");
    chol_ = llt.matrixL();
    if ((chol_.diagonal().array() <= 0.0).any())
        throw NumericalError(std::string(what) + ": not positive definite");
    const auto n = m_.rows();
    inv_chol_ = chol_.triangularView<Eigen::Lower>().solve(Mat::Identity(n, n));
    inv_ = inv_chol_.transpose() * inv_chol_;
    inv_ = 0.5 * (inv_ + inv_.transpose());
    log_det_ = 2.0 * chol_.diagonal().array().log().sum();
}

int eigen_floor(Mat& m, double floor) {
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    Vec ev = es.eigenvalues();
    int raised = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (!(ev[i] >= floor)) {
            ev[i] = floor;
            ++raised;
        }
    }
    if (raised > 0) {
        m = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
        m = 0.5 * (m + m.transpose());
    }
    return raised;
}

}  // namespace cpaem

#include "cpaem/gaussian.hpp"

#include "cpaem/errors.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace cpaem {

double mvn_logpdf(const Vec& x, const Vec& mean, const SpdMatrix& cov) {
    if (x.size() != mean.size() || x.size() != cov.dim()) throw InputError("mvn_logpdf: dimension mismatch");
    const Vec w = cov.inverse_cholesky().triangularView<Eigen::Lower>() * (x - mean);
    const double k = static_cast<double>(x.size());
    return -0.5 * (w.squaredNorm() + cov.log_det() + k * std::log(2.0 * std::numbers::pi));
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool finite_limit(double a) { return a > kNegInf; }

std::vector<Eigen::Index> complement(Eigen::Index n, std::initializer_list<Eigen::Index> drop) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < n; ++i) {
        bool skip = false;
        for (auto d : drop) skip = skip || d == i;
        if (!skip) out.push_back(i);
    }
    return out;
}

// P(Z_rest >= a_rest | Z_cond = a_cond) for Z ~ N(0, cov).
double conditional_tail(const Vec& a, const Mat& cov, const std::vector<Eigen::Index>& cond,
                        const std::vector<Eigen::Index>& rest) {
    if (rest.empty()) return 1.0;
    const auto nc = static_cast<Eigen::Index>(cond.size());
    const auto nr = static_cast<Eigen::Index>(rest.size());
    Mat scc(nc, nc), src(nr, nc), srr(nr, nr);
    Vec ac(nc), ar(nr);
    for (Eigen::Index i = 0; i < nc; ++i) {
        ac[i] = a[cond[static_cast<std::size_t>(i)]];
        for (Eigen::Index j = 0; j < nc; ++j) scc(i, j) = cov(cond[static_cast<std::size_t>(i)], cond[static_cast<std::size_t>(j)]);
    }
    for (Eigen::Index i = 0; i < nr; ++i) {
        ar[i] = a[rest[static_cast<std::size_t>(i)]];
        for (Eigen::Index j = 0; j < nc; ++j) src(i, j) = cov(rest[static_cast<std::size_t>(i)], cond[static_cast<std::size_t>(j)]);
        for (Eigen::Index j = 0; j < nr; ++j) srr(i, j) = cov(rest[static_cast<std::size_t>(i)], rest[static_cast<std::size_t>(j)]);
    }
    const Eigen::LDLT<Mat> ldlt(scc);
    const Mat gain = ldlt.solve(src.transpose()).transpose();  // nr x nc
    const Vec mu = gain * ac;
    Mat cc = srr - gain * src.transpose();
    cc = 0.5 * (cc + cc.transpose());
    Vec shifted(nr);
    for (Eigen::Index i = 0; i < nr; ++i) shifted[i] = finite_limit(ar[i]) ? ar[i] - mu[i] : kNegInf;
    return rect_cdf(shifted, cc);
}

double bivariate_density(double x, double y, double sxx, double syy, double sxy) {
    const double det = sxx * syy - sxy * sxy;
    if (!(det > 0.0)) throw NumericalError("G_matrix: singular bivariate marginal");
    const double q = (syy * x * x - 2.0 * sxy * x * y + sxx * y * y) / det;
    return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(det));
}

struct OrthantTerms {
    double p0 = 0.0;
    Vec f;
    Mat h;  // m2 = p0 cov + cov h cov
};

OrthantTerms orthant_terms(const Vec& a, const Mat& cov) {
    const Eigen::Index k = a.size();
    OrthantTerms t;
    t.p0 = rect_cdf(a, cov);
    t.f = F_vector(a, cov);
    const Mat g = G_matrix(a, cov);
    t.h = g;
    const Vec sg = (cov.array() * g.array()).rowwise().sum();
    for (Eigen::Index i = 0; i < k; ++i)
        if (finite_limit(a[i])) t.h(i, i) += (a[i] * t.f[i] - sg[i]) / cov(i, i);
    return t;
}

}  // namespace

Vec F_vector(const Vec& a, const Mat& cov) {
    const Eigen::Index n = a.size();
    if (n > 3) throw InputError("F_vector: dimension above 3");
    Vec f = Vec::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        if (!finite_limit(a[k])) continue;
        const double var = cov(k, k);
        if (!(var > 0.0)) throw NumericalError("F_vector: singular marginal variance");
        const double dens = std::exp(-0.5 * a[k] * a[k] / var) / std::sqrt(2.0 * std::numbers::pi * var);
        if (dens == 0.0) continue;
        f[k] = dens * conditional_tail(a, cov, {k}, complement(n, {k}));
    }
    return f;
}

Mat G_matrix(const Vec& a, const Mat& cov) {
    const Eigen::Index n = a.size();
    if (n > 3) throw InputError("G_matrix: dimension above 3");
    Mat g = Mat::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index l = k + 1; l < n; ++l) {
            if (!finite_limit(a[k]) || !finite_limit(a[l])) continue;
            const double dens = bivariate_density(a[k], a[l], cov(k, k), cov(l, l), cov(k, l));
            if (dens == 0.0) continue;
            g(k, l) = g(l, k) = dens * conditional_tail(a, cov, {k, l}, complement(n, {k, l}));
        }
    }
    return g;
}

OrthantMoments orthant_moments(const Vec& a, const Mat& cov) {
    const OrthantTerms t = orthant_terms(a, cov);
    OrthantMoments m;
    m.p0 = t.p0;
    m.m1 = cov * t.f;
    m.m2 = t.p0 * cov + cov * t.h * cov;
    m.m2 = 0.5 * (m.m2 + m.m2.transpose());
    return m;
}

RegionMoments region_moments(const ConeDecomposition& cones, const Vec& shift, const Mat& cov) {
    const Eigen::Index s = cov.rows();
    double p0 = cones.full_space_sign;
    Vec v = Vec::Zero(s);
    Mat w = Mat::Zero(s, s);
    for (const SignedOrthantPiece& p : cones.pieces) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < s; ++i)
            if (finite_limit(p.lower[i])) rows.push_back(i);
        const auto k = static_cast<Eigen::Index>(rows.size());
        Mat r(k, s);
        Vec lo(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            r.row(i) = p.transform.row(rows[static_cast<std::size_t>(i)]);
            lo[i] = p.lower[rows[static_cast<std::size_t>(i)]] - r.row(i).dot(shift);
        }
        Mat cu = r * cov * r.transpose();
        cu = 0.5 * (cu + cu.transpose());
        const OrthantTerms t = orthant_terms(lo, cu);
        p0 += p.sign * t.p0;
        v += p.sign * (r.transpose() * t.f);
        w += p.sign * (r.transpose() * t.h * r);
    }
    RegionMoments m;
    if (p0 < 1e-14) {
        m.e0 = 0.0;
        m.e1 = Vec::Zero(s);
        m.e2 = Mat::Zero(s, s);
        return m;
    }
    m.e0 = std::min(p0, 1.0);
    m.e1 = cov * v;
    m.e2 = p0 * cov + cov * w * cov;
    m.e2 = 0.5 * (m.e2 + m.e2.transpose());
    return m;
}

double region_mass(const ConeDecomposition& cones, const Vec& shift, const Mat& cov) {
    const Eigen::Index s = cov.rows();
    double p0 = cones.full_space_sign;
    for (const SignedOrthantPiece& p : cones.pieces) {
        Vec lo(s);
        for (Eigen::Index i = 0; i < s; ++i)
            lo[i] = finite_limit(p.lower[i]) ? p.lower[i] - p.transform.row(i).dot(shift) : kNegInf;
        Mat cu = p.transform * cov * p.transform.transpose();
        cu = 0.5 * (cu + cu.transpose());
        p0 += p.sign * rect_cdf(lo, cu);
    }
    return p0 < 1e-14 ? 0.0 : std::min(p0, 1.0);
}

RegionMoments region_moments_at(const ConeDecomposition& cones, const Vec& mean, const Mat& cov) {
    RegionMoments c = region_moments(cones, mean, cov);
    RegionMoments m;
    m.e0 = c.e0;
    m.e1 = c.e1 + c.e0 * mean;
    m.e2 = c.e2 + c.e1 * mean.transpose() + mean * c.e1.transpose() + c.e0 * mean * mean.transpose();
    m.e2 = 0.5 * (m.e2 + m.e2.transpose());
    return m;
}

}  // namespace cpaem

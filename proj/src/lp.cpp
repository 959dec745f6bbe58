#include "cpaem/lp.hpp"

#include "cpaem/errors.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace cpaem {
namespace {

constexpr double kPivotTol = 1e-11;

struct Tableau {
    // rows 0..m-1 are constraints, row m is the objective (reduced costs)
    Mat t;
    std::vector<int> basis;
    int m = 0;
    int cols = 0;  // structural + slack + artificial, rhs stored in column `cols`

    double& rhs(int i) { return t(i, cols); }

    void pivot(int r, int c) {
        t.row(r) /= t(r, c);
        for (int i = 0; i <= m; ++i) {
            if (i == r) continue;
            const double f = t(i, c);
            if (f != 0.0) t.row(i) -= f * t.row(r);
        }
        basis[static_cast<std::size_t>(r)] = c;
    }

    // Bland's rule: entering = lowest index with negative reduced cost,
    // leaving = minimum ratio, ties broken by lowest basic index.
    LpStatus solve(int allowed_cols) {
        const double scale = std::max(1.0, t.row(m).head(allowed_cols).cwiseAbs().maxCoeff());
        for (int iter = 0; iter < 50000; ++iter) {
            int enter = -1;
            for (int j = 0; j < allowed_cols; ++j) {
                if (t(m, j) < -kPivotTol * scale) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return LpStatus::Optimal;
            int leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m; ++i) {
                const double a = t(i, enter);
                if (a <= kPivotTol) continue;
                const double ratio = rhs(i) / a;
                if (leave < 0 || ratio < best - 1e-13 ||
                    (ratio <= best + 1e-13 && basis[static_cast<std::size_t>(i)] <
                                                  basis[static_cast<std::size_t>(leave)])) {
                    best = std::min(best, ratio);
                    leave = i;
                }
            }
            if (leave < 0) return LpStatus::Unbounded;
            pivot(leave, enter);
        }
        throw NumericalError("simplex iteration limit reached");
    }
};

}  // namespace

LpResult lp_maximize(const Vec& c, const Mat& a, const Vec& b) {
    const int m = static_cast<int>(a.rows());
    const int n = static_cast<int>(a.cols());
    if (c.size() != n || b.size() != m) throw InputError("lp_maximize: dimension mismatch");
    if (!a.allFinite() || !b.allFinite() || !c.allFinite())
        throw NumericalError("lp_maximize: non-finite problem data");

    // x = xp - xn, one slack per row, one artificial per row with negative rhs.
    std::vector<int> art_row;
    for (int i = 0; i < m; ++i)
        if (b[i] < 0.0) art_row.push_back(i);
    const int n_struct = 2 * n;
    const int n_art = static_cast<int>(art_row.size());
    Tableau tab;
    tab.m = m;
    tab.cols = n_struct + m + n_art;
    tab.t = Mat::Zero(m + 1, tab.cols + 1);
    tab.basis.assign(static_cast<std::size_t>(m), -1);

    for (int i = 0; i < m; ++i) {
        const double sgn = b[i] < 0.0 ? -1.0 : 1.0;
        tab.t.row(i).segment(0, n) = sgn * a.row(i);
        tab.t.row(i).segment(n, n) = -sgn * a.row(i);
        tab.t(i, n_struct + i) = sgn;
        tab.rhs(i) = sgn * b[i];
        if (sgn > 0.0) tab.basis[static_cast<std::size_t>(i)] = n_struct + i;
    }
    for (int k = 0; k < n_art; ++k) {
        const int i = art_row[static_cast<std::size_t>(k)];
        tab.t(i, n_struct + m + k) = 1.0;
        tab.basis[static_cast<std::size_t>(i)] = n_struct + m + k;
    }

    if (n_art > 0) {
        // phase 1: maximize -sum(artificials)
        for (int k = 0; k < n_art; ++k) tab.t(m, n_struct + m + k) = 1.0;
        for (int k = 0; k < n_art; ++k) tab.t.row(m) -= tab.t.row(art_row[static_cast<std::size_t>(k)]);
        tab.solve(tab.cols);
        const double bscale = std::max(1.0, b.cwiseAbs().maxCoeff());
        if (tab.rhs(m) < -1e-9 * bscale) return LpResult{LpStatus::Infeasible, Vec(), 0.0};
        // drive remaining artificials out of the basis
        for (int i = 0; i < m; ++i) {
            if (tab.basis[static_cast<std::size_t>(i)] < n_struct + m) continue;
            for (int j = 0; j < n_struct + m; ++j) {
                if (std::fabs(tab.t(i, j)) > 1e-9) {
                    tab.pivot(i, j);
                    break;
                }
            }
        }
    }

    // phase 2
    tab.t.row(m).setZero();
    tab.t.row(m).segment(0, n) = -c.transpose();
    tab.t.row(m).segment(n, n) = c.transpose();
    for (int i = 0; i < m; ++i) {
        const int bj = tab.basis[static_cast<std::size_t>(i)];
        if (bj < n_struct + m && tab.t(m, bj) != 0.0) tab.t.row(m) -= tab.t(m, bj) * tab.t.row(i);
    }
    // artificial columns stay out: they are beyond allowed_cols
    const LpStatus st = tab.solve(n_struct + m);
    if (st == LpStatus::Unbounded) return LpResult{LpStatus::Unbounded, Vec(), 0.0};

    Vec y = Vec::Zero(n_struct);
    for (int i = 0; i < m; ++i) {
        const int bj = tab.basis[static_cast<std::size_t>(i)];
        if (bj < n_struct) y[bj] = tab.rhs(i);
    }
    LpResult out;
    out.status = LpStatus::Optimal;
    out.x = y.head(n) - y.tail(n);
    out.value = c.dot(out.x);
    return out;
}

}  // namespace cpaem

#include "cpaem/errors.hpp"
#include "cpaem/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cpaem {

double Simplex::volume() const {
    const auto s = static_cast<Eigen::Index>(vertices.size()) - 1;
    Mat t(s, s);
    for (Eigen::Index j = 0; j < s; ++j) t.col(j) = vertices[static_cast<std::size_t>(j + 1)] - vertices[0];
    double fact = 1.0;
    for (Eigen::Index k = 2; k <= s; ++k) fact *= static_cast<double>(k);
    return std::fabs(t.determinant()) / fact;
}

void ConeDecomposition::append(const ConeDecomposition& other) {
    pieces.insert(pieces.end(), other.pieces.begin(), other.pieces.end());
    full_space_sign += other.full_space_sign;
}

namespace {

double hull_scale(const std::vector<Vec>& v) {
    double m = 0.0;
    for (const Vec& p : v)
        for (const Vec& q : v) m = std::max(m, (p - q).norm());
    return m;
}

// Orders coplanar points around their centroid; `u`, `w` span the plane.
std::vector<Vec> sort_by_angle(std::vector<Vec> pts, const Vec& u, const Vec& w) {
    Vec centre = Vec::Zero(pts.front().size());
    for (const Vec& p : pts) centre += p;
    centre /= static_cast<double>(pts.size());
    std::sort(pts.begin(), pts.end(), [&](const Vec& a, const Vec& b) {
        return std::atan2((a - centre).dot(w), (a - centre).dot(u)) <
               std::atan2((b - centre).dot(w), (b - centre).dot(u));
    });
    return pts;
}

void check_simplex(const Simplex& s, double scale) {
    const auto dim = static_cast<int>(s.vertices.size()) - 1;
    if (!(s.volume() > 1e-12 * std::pow(scale, dim)))
        throw NumericalError("triangulation produced a flat simplex");
}

Vec cross3(const Vec& a, const Vec& b) {
    Vec c(3);
    c << a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0];
    return c;
}

std::vector<Simplex> triangulate_3d(const std::vector<Vec>& v, double scale) {
    const std::size_t n = v.size();
    const double tol = 1e-9 * scale;
    std::vector<std::vector<std::size_t>> facets;
    std::vector<Vec> facet_normal;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            for (std::size_t k = j + 1; k < n; ++k) {
                Vec nrm = cross3(v[j] - v[i], v[k] - v[i]);
                const double len = nrm.norm();
                if (len <= 1e-9 * scale * scale) continue;
                nrm /= len;
                const double off = nrm.dot(v[i]);
                int above = 0, below = 0;
                std::vector<std::size_t> on;
                for (std::size_t m = 0; m < n; ++m) {
                    const double d = nrm.dot(v[m]) - off;
                    if (d > tol) ++above;
                    else if (d < -tol) ++below;
                    else on.push_back(m);
                }
                if (above > 0 && below > 0) continue;
                if (std::find(facets.begin(), facets.end(), on) != facets.end()) continue;
                facets.push_back(on);
                facet_normal.push_back(nrm);
            }
        }
    }
    std::vector<Simplex> out;
    for (std::size_t f = 0; f < facets.size(); ++f) {
        const auto& on = facets[f];
        if (std::find(on.begin(), on.end(), std::size_t{0}) != on.end()) continue;
        std::vector<Vec> poly;
        for (auto m : on) poly.push_back(v[m]);
        const Vec u = (poly[1] - poly[0]).normalized();
        const Vec w = cross3(facet_normal[f], u);
        poly = sort_by_angle(std::move(poly), u, w);
        for (std::size_t m = 1; m + 1 < poly.size(); ++m) {
            Simplex s{{v[0], poly[0], poly[m], poly[m + 1]}};
            check_simplex(s, scale);
            out.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace

std::vector<Simplex> triangulate(const std::vector<Vec>& vertices) {
    if (vertices.empty()) throw InputError("triangulate: no vertices");
    const auto s = static_cast<std::size_t>(vertices.front().size());
    if (s < 1 || s > 3) throw InputError("triangulate supports dimension 1..3");
    if (vertices.size() < s + 1) throw NumericalError("triangulate: fewer than S+1 vertices");
    const double scale = hull_scale(vertices);
    if (!(scale > 0.0)) throw NumericalError("triangulate: all vertices coincide");

    std::vector<Simplex> out;
    if (s == 1) {
        auto [lo, hi] = std::minmax_element(vertices.begin(), vertices.end(),
                                            [](const Vec& a, const Vec& b) { return a[0] < b[0]; });
        out.push_back(Simplex{{*lo, *hi}});
        check_simplex(out.back(), scale);
    } else if (s == 2) {
        Vec u(2), w(2);
        u << 1.0, 0.0;
        w << 0.0, 1.0;
        const auto poly = sort_by_angle(vertices, u, w);
        for (std::size_t m = 1; m + 1 < poly.size(); ++m) {
            Simplex t{{poly[0], poly[m], poly[m + 1]}};
            // collinear triples can appear when a vertex sits on an edge
            if (t.volume() <= 1e-12 * scale * scale) continue;
            out.push_back(std::move(t));
        }
        if (out.empty()) throw NumericalError("triangulate: flat polygon");
    } else {
        out = triangulate_3d(vertices, scale);
        if (out.empty()) throw NumericalError("triangulate: flat polytope");
    }
    return out;
}

ConeDecomposition cone_decomposition(const Simplex& simplex) {
    const auto s = static_cast<Eigen::Index>(simplex.vertices.size()) - 1;
    if (s < 1) throw InputError("cone_decomposition: empty simplex");
    const Vec& v0 = simplex.vertices[0];
    Mat t(s, s);
    for (Eigen::Index j = 0; j < s; ++j) t.col(j) = simplex.vertices[static_cast<std::size_t>(j + 1)] - v0;
    Eigen::FullPivLU<Mat> lu(t);
    if (!lu.isInvertible()) throw NumericalError("cone_decomposition: degenerate simplex");
    const Mat tinv = lu.inverse();

    // Facet j (opposite vertex j) as n_j . z <= c_j, from barycentric
    // coordinates lambda_j >= 0.
    Mat n(s + 1, s);
    Vec c(s + 1);
    const Vec colsum = tinv.colwise().sum().transpose();
    n.row(0) = colsum.transpose();
    c[0] = 1.0 + colsum.dot(v0);
    for (Eigen::Index j = 1; j <= s; ++j) {
        n.row(j) = -tinv.row(j - 1);
        c[j] = -tinv.row(j - 1).dot(v0);
    }
    for (Eigen::Index j = 0; j <= s; ++j) {
        const double len = n.row(j).norm();
        n.row(j) /= len;
        c[j] /= len;
    }

    ConeDecomposition out;
    out.full_space_sign = s % 2 == 0 ? 1 : -1;
    const unsigned nsub = 1u << static_cast<unsigned>(s + 1);
    for (unsigned mask = 1; mask < nsub; ++mask) {
        std::vector<Eigen::Index> active;
        for (Eigen::Index j = 0; j <= s; ++j)
            if (mask & (1u << static_cast<unsigned>(j))) active.push_back(j);
        const auto k = static_cast<Eigen::Index>(active.size());
        if (k > s) continue;
        SignedOrthantPiece p;
        p.sign = (k + s) % 2 == 0 ? 1 : -1;
        p.transform.resize(s, s);
        p.lower.resize(s);
        Mat act(k, s);
        for (Eigen::Index i = 0; i < k; ++i) {
            act.row(i) = -n.row(active[static_cast<std::size_t>(i)]);
            p.transform.row(i) = act.row(i);
            p.lower[i] = -c[active[static_cast<std::size_t>(i)]];
        }
        if (k < s) {
            // orthonormal completion: trailing columns of a full QR of act^T
            Eigen::HouseholderQR<Mat> qr(act.transpose());
            const Mat q = qr.householderQ() * Mat::Identity(s, s);
            for (Eigen::Index i = k; i < s; ++i) {
                p.transform.row(i) = q.col(i).transpose();
                p.lower[i] = -std::numeric_limits<double>::infinity();
            }
        }
        if (std::fabs(p.transform.determinant()) <= 1e-12)
            throw NumericalError("cone_decomposition: singular completion");
        out.pieces.push_back(std::move(p));
    }
    return out;
}

}  // namespace cpaem

#include "cpaem/geometry.hpp"

#include "cpaem/errors.hpp"
#include "cpaem/lp.hpp"
#include "cpaem/parallel.hpp"
#include "cpaem/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

namespace cpaem {

PolytopeH PolytopeH::subset(const std::vector<int>& rows) const {
    PolytopeH out;
    out.normals.resize(static_cast<Eigen::Index>(rows.size()), normals.cols());
    out.offsets.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.normals.row(static_cast<Eigen::Index>(i)) = normals.row(rows[i]);
        out.offsets[static_cast<Eigen::Index>(i)] = offsets[rows[i]];
        out.face_origin.push_back(face_origin[static_cast<std::size_t>(rows[i])]);
    }
    return out;
}

bool PolytopeH::contains(const Vec& z, double tol) const {
    for (Eigen::Index i = 0; i < normals.rows(); ++i) {
        const double scale = std::max(1.0, normals.row(i).norm());
        if (normals.row(i).dot(z) > offsets[i] + tol * scale) return false;
    }
    return true;
}

int Partition::find(const ActivationCode& code) const {
    auto it = std::lower_bound(regions.begin(), regions.end(), code,
                               [](const Region& r, const ActivationCode& c) { return r.code < c; });
    if (it == regions.end() || it->code != code) return -1;
    return static_cast<int>(it - regions.begin());
}

double default_bounding_radius(const Mat& sigma_z) {
    return 8.0 * sigma_z.diagonal().cwiseSqrt().maxCoeff();
}

PolytopeH region_hrep(const GenerativeNetwork& net, const ActivationCode& code) {
    const int s = net.latent_dim();
    std::vector<Vec> rows;
    std::vector<double> offs;
    PolytopeH h;
    for (int l = 1; l <= net.hidden_layers(); ++l) {
        const auto [a, b] = partial_affine(net, code, l);
        const auto& q = code.signs[static_cast<std::size_t>(l - 1)];
        for (Eigen::Index k = 0; k < a.rows(); ++k) {
            const double sgn = q[static_cast<std::size_t>(k)] > 0 ? 1.0 : -1.0;
            Vec n = -sgn * a.row(k).transpose();
            const double c = sgn * b[k];
            // a zero normal is either always satisfied (dropped) or makes the
            // region empty (kept, so the LP reports infeasibility)
            if (n.cwiseAbs().maxCoeff() == 0.0 && c >= 0.0) continue;
            rows.push_back(std::move(n));
            offs.push_back(c);
            h.face_origin.push_back(FaceOrigin{l, static_cast<int>(k)});
        }
    }
    h.normals.resize(static_cast<Eigen::Index>(rows.size()), s);
    h.offsets.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        h.normals.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        h.offsets[static_cast<Eigen::Index>(i)] = offs[i];
    }
    return h;
}

PolytopeH with_box(const PolytopeH& h, double radius) {
    const int s = h.dim();
    PolytopeH out;
    out.normals.resize(h.faces() + 2 * s, s);
    out.offsets.resize(h.faces() + 2 * s);
    out.normals.topRows(h.faces()) = h.normals;
    out.offsets.head(h.faces()) = h.offsets;
    out.face_origin = h.face_origin;
    for (int i = 0; i < s; ++i) {
        for (int side = 0; side < 2; ++side) {
            const Eigen::Index r = h.faces() + 2 * i + side;
            out.normals.row(r).setZero();
            out.normals(r, i) = side == 0 ? 1.0 : -1.0;
            out.offsets[r] = radius;
            out.face_origin.push_back(FaceOrigin{0, 2 * i + side});
        }
    }
    return out;
}

namespace {

// Chebyshev LP on (z, t) with optional equality rows; returns (centre, t).
std::optional<std::pair<Vec, double>> chebyshev(const Mat& n, const Vec& c, const Mat& eq_n,
                                                const Vec& eq_c, double cap) {
    const Eigen::Index f = n.rows();
    const Eigen::Index s = n.cols();
    const Eigen::Index e = eq_n.rows();
    Mat a = Mat::Zero(f + 2 * e + 1, s + 1);
    Vec b(f + 2 * e + 1);
    for (Eigen::Index i = 0; i < f; ++i) {
        a.row(i).head(s) = n.row(i);
        a(i, s) = n.row(i).norm();
        b[i] = c[i];
    }
    for (Eigen::Index i = 0; i < e; ++i) {
        a.row(f + 2 * i).head(s) = eq_n.row(i);
        b[f + 2 * i] = eq_c[i];
        a.row(f + 2 * i + 1).head(s) = -eq_n.row(i);
        b[f + 2 * i + 1] = -eq_c[i];
    }
    a(f + 2 * e, s) = 1.0;
    b[f + 2 * e] = cap;
    Vec obj = Vec::Zero(s + 1);
    obj[s] = 1.0;
    const LpResult r = lp_maximize(obj, a, b);
    if (r.status != LpStatus::Optimal) return std::nullopt;
    return std::make_pair(Vec(r.x.head(s)), r.x[s]);
}

// Rows scaled to unit normals; zero rows are left as they are.
void normalize_rows(Mat& n, Vec& c) {
    for (Eigen::Index i = 0; i < n.rows(); ++i) {
        const double norm = n.row(i).norm();
        if (norm > 0.0) {
            n.row(i) /= norm;
            c[i] /= norm;
        }
    }
}

constexpr double kCenterCap = 1e4;

}  // namespace

std::optional<Vec> interior_point(const PolytopeH& h, const GeometryTolerances& tol) {
    Mat n = h.normals;
    Vec c = h.offsets;
    normalize_rows(n, c);
    auto r = chebyshev(n, c, Mat(0, h.dim()), Vec(0), kCenterCap);
    if (!r || r->second <= tol.empty_margin) return std::nullopt;
    return r->first;
}

std::vector<int> reduce_inequalities(const PolytopeH& h, const GeometryTolerances& tol) {
    Mat n = h.normals;
    Vec c = h.offsets;
    normalize_rows(n, c);
    const int f = h.faces();
    std::vector<bool> keep(static_cast<std::size_t>(f), true);
    for (int i = 0; i < f; ++i) {
        if (n.row(i).squaredNorm() == 0.0) {
            keep[static_cast<std::size_t>(i)] = false;
            continue;
        }
        std::vector<int> others;
        for (int j = 0; j < f; ++j)
            if (j != i && keep[static_cast<std::size_t>(j)]) others.push_back(j);
        Mat a(static_cast<Eigen::Index>(others.size()), h.dim());
        Vec b(static_cast<Eigen::Index>(others.size()));
        for (std::size_t k = 0; k < others.size(); ++k) {
            a.row(static_cast<Eigen::Index>(k)) = n.row(others[k]);
            b[static_cast<Eigen::Index>(k)] = c[others[k]];
        }
        const LpResult r = lp_maximize(n.row(i).transpose(), a, b);
        if (r.status == LpStatus::Optimal && r.value <= c[i] + tol.redundancy)
            keep[static_cast<std::size_t>(i)] = false;
    }
    std::vector<int> out;
    for (int i = 0; i < f; ++i)
        if (keep[static_cast<std::size_t>(i)]) out.push_back(i);
    return out;
}

std::vector<Vec> vertex_enumeration(const PolytopeH& h, const GeometryTolerances& tol) {
    const int s = h.dim();
    const int f = h.faces();
    if (s < 1 || s > 3) throw InputError("vertex_enumeration supports latent dimension 1..3");
    Mat n = h.normals;
    Vec c = h.offsets;
    normalize_rows(n, c);

    std::vector<Vec> verts;
    std::vector<int> idx(static_cast<std::size_t>(s));
    auto visit = [&]() {
        Mat a(s, s);
        Vec b(s);
        for (int k = 0; k < s; ++k) {
            a.row(k) = n.row(idx[static_cast<std::size_t>(k)]);
            b[k] = c[idx[static_cast<std::size_t>(k)]];
        }
        Eigen::FullPivLU<Mat> lu(a);
        if (lu.rank() < s || std::fabs(lu.determinant()) < 1e-12) return;
        const Vec z = lu.solve(b);
        if (!z.allFinite()) return;
        for (int i = 0; i < f; ++i)
            if (n.row(i).dot(z) > c[i] + tol.feasibility) return;
        for (const Vec& v : verts)
            if ((v - z).cwiseAbs().maxCoeff() <= tol.vertex_merge) return;
        verts.push_back(z);
    };
    // lexicographic enumeration of S-subsets
    for (int k = 0; k < s; ++k) idx[static_cast<std::size_t>(k)] = k;
    if (f >= s) {
        while (true) {
            visit();
            int k = s - 1;
            while (k >= 0 && idx[static_cast<std::size_t>(k)] == f - s + k) --k;
            if (k < 0) break;
            ++idx[static_cast<std::size_t>(k)];
            for (int m = k + 1; m < s; ++m) idx[static_cast<std::size_t>(m)] = idx[static_cast<std::size_t>(m - 1)] + 1;
        }
    }
    if (static_cast<int>(verts.size()) < s + 1)
        throw NumericalError("degenerate region: only " + std::to_string(verts.size()) +
                             " vertices in dimension " + std::to_string(s));
    std::sort(verts.begin(), verts.end(), [](const Vec& a, const Vec& b) {
        return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
    });
    return verts;
}

std::optional<Region> build_region(const GenerativeNetwork& net, const ActivationCode& code,
                                   double bounding_radius, const GeometryTolerances& tol) {
    const PolytopeH full = with_box(region_hrep(net, code), bounding_radius);
    auto centre = interior_point(full, tol);
    if (!centre) return std::nullopt;
    Region r;
    r.code = code;
    r.interior = *centre;
    r.hrep = full.subset(reduce_inequalities(full, tol));
    for (const auto& o : r.hrep.face_origin)
        if (o.is_box()) r.clipped = true;
    r.vertices = vertex_enumeration(r.hrep, tol);
    r.affine = per_region_affine(net, code);
    r.simplices = triangulate(r.vertices);
    for (const Simplex& s : r.simplices) r.cones.append(cone_decomposition(s));
    return r;
}

namespace {

struct WalkResult {
    std::optional<Region> region;
    std::vector<ActivationCode> neighbours;
};

bool same_hyperplane(const Vec& n1, double c1, const Vec& n2, double c2) {
    constexpr double eps = 1e-9;
    if ((n1 - n2).cwiseAbs().maxCoeff() < eps && std::fabs(c1 - c2) < eps) return true;
    return (n1 + n2).cwiseAbs().maxCoeff() < eps && std::fabs(c1 + c2) < eps;
}

// Code of a point just across facet `f` of the region, or nullopt when the
// facet's relative interior cannot be located.
std::optional<ActivationCode> probe_across(const GenerativeNetwork& net, const PolytopeH& h, int f,
                                           double radius) {
    Mat n = h.normals;
    Vec c = h.offsets;
    normalize_rows(n, c);
    std::vector<int> others;
    for (int i = 0; i < h.faces(); ++i)
        if (i != f) others.push_back(i);
    Mat on(static_cast<Eigen::Index>(others.size()), h.dim());
    Vec oc(static_cast<Eigen::Index>(others.size()));
    for (std::size_t k = 0; k < others.size(); ++k) {
        on.row(static_cast<Eigen::Index>(k)) = n.row(others[k]);
        oc[static_cast<Eigen::Index>(k)] = c[others[k]];
    }
    auto r = chebyshev(on, oc, n.row(f), c.segment(f, 1), kCenterCap);
    if (!r || r->second <= 0.0) return std::nullopt;
    const double step = std::min(0.5 * r->second, 1e-6 * std::max(1.0, radius));
    const Vec p = r->first + step * n.row(f).transpose();
    if (p.cwiseAbs().maxCoeff() >= radius) return std::nullopt;
    return activation_code(net, p);
}

WalkResult walk_step(const GenerativeNetwork& net, const ActivationCode& code, const PartitionOptions& opt) {
    WalkResult out;
    out.region = build_region(net, code, opt.bounding_radius, opt.tol);
    if (!out.region) return out;
    const Region& reg = *out.region;

    const PolytopeH raw = region_hrep(net, code);
    Mat rn = raw.normals;
    Vec rc = raw.offsets;
    normalize_rows(rn, rc);
    Mat fn = reg.hrep.normals;
    Vec fc = reg.hrep.offsets;
    normalize_rows(fn, fc);

    for (int f = 0; f < reg.hrep.faces(); ++f) {
        if (reg.hrep.face_origin[static_cast<std::size_t>(f)].is_box()) continue;
        ActivationCode flipped = code;
        for (int i = 0; i < raw.faces(); ++i) {
            if (!same_hyperplane(rn.row(i).transpose(), rc[i], fn.row(f).transpose(), fc[f])) continue;
            const FaceOrigin& o = raw.face_origin[static_cast<std::size_t>(i)];
            auto& s = flipped.signs[static_cast<std::size_t>(o.layer - 1)][static_cast<std::size_t>(o.unit)];
            s = static_cast<std::int8_t>(-s);
        }
        if (interior_point(with_box(region_hrep(net, flipped), opt.bounding_radius), opt.tol)) {
            out.neighbours.push_back(std::move(flipped));
        } else if (auto probed = probe_across(net, reg.hrep, f, opt.bounding_radius)) {
            out.neighbours.push_back(std::move(*probed));
        }
    }
    return out;
}

}  // namespace

Partition enumerate_partition(const GenerativeNetwork& net, const Vec& seed, const PartitionOptions& options) {
    if (seed.size() != net.latent_dim()) throw InputError("partition seed has the wrong dimension");
    if (!(options.bounding_radius > 0.0)) throw InputError("bounding radius must be positive");
    if (!seed.allFinite() || seed.cwiseAbs().maxCoeff() >= options.bounding_radius)
        throw InputError("partition seed must lie strictly inside the bounding box");
    if (net.latent_dim() > 3) throw InputError("partition enumeration supports latent dimension <= 3");

    Partition part;
    part.bounding_radius = options.bounding_radius;
    std::set<ActivationCode> seen;
    // a seed on a hyperplane can carry a code with empty interior; nudge it
    ActivationCode start = activation_code(net, seed);
    if (!build_region(net, start, options.bounding_radius, options.tol)) {
        Rng rng(0x5eed);
        bool found = false;
        for (int attempt = 0; attempt < 64 && !found; ++attempt) {
            Vec dir(seed.size());
            for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = rng.normal();
            const double step = options.bounding_radius * 1e-6 * std::pow(2.0, attempt / 4);
            const Vec z = seed + step * dir.normalized();
            if (z.cwiseAbs().maxCoeff() >= options.bounding_radius) continue;
            const ActivationCode c = activation_code(net, z);
            if (build_region(net, c, options.bounding_radius, options.tol)) {
                start = c;
                found = true;
            }
        }
        if (!found) throw NumericalError("no full-dimensional region near the partition seed");
    }
    std::vector<ActivationCode> frontier{start};
    seen.insert(frontier.front());

    while (!frontier.empty()) {
        std::vector<WalkResult> results(frontier.size());
        parallel_for(frontier.size(), [&](std::size_t i) { results[i] = walk_step(net, frontier[i], options); });
        std::set<ActivationCode> next;
        for (auto& r : results) {
            if (!r.region) continue;
            for (auto& c : r.neighbours)
                if (!seen.contains(c)) next.insert(c);
            part.regions.push_back(std::move(*r.region));
            if (part.regions.size() > options.max_regions)
                throw ResourceError("partition exceeds the region cap of " + std::to_string(options.max_regions));
        }
        frontier.assign(next.begin(), next.end());
        seen.insert(next.begin(), next.end());
    }
    std::sort(part.regions.begin(), part.regions.end(),
              [](const Region& a, const Region& b) { return a.code < b.code; });
    return part;
}

}  // namespace cpaem

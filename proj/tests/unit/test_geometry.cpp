#include "helpers.hpp"

#include "cpaem/errors.hpp"
#include "cpaem/gaussian.hpp"
#include "cpaem/geometry.hpp"
#include "cpaem/lp.hpp"
#include "cpaem/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

using namespace cpaem;
using namespace testnets;

namespace {

PolytopeH poly(const Mat& n, const Vec& c) {
    PolytopeH h;
    h.normals = n;
    h.offsets = c;
    for (Eigen::Index i = 0; i < n.rows(); ++i) h.face_origin.push_back(FaceOrigin{1, static_cast<int>(i)});
    return h;
}

double partition_volume(const Partition& p) {
    double vol = 0.0;
    for (const Region& r : p.regions)
        for (const Simplex& s : r.simplices) vol += s.volume();
    return vol;
}

}  // namespace

TEST_SUITE("lp") {
    TEST_CASE("small programs") {
        // max x + y, x <= 1, y <= 2, x + y <= 2.5
        const LpResult r = lp_maximize(v({1.0, 1.0}), m({{1, 0}, {0, 1}, {1, 1}}), v({1.0, 2.0, 2.5}));
        REQUIRE(r.status == LpStatus::Optimal);
        CHECK(r.value == doctest::Approx(2.5));
        // negative right-hand sides exercise phase 1: x >= 1 (as -x <= -1), x <= 3
        const LpResult s = lp_maximize(v({-1.0}), m({{-1}, {1}}), v({-1.0, 3.0}));
        REQUIRE(s.status == LpStatus::Optimal);
        CHECK(s.x[0] == doctest::Approx(1.0));
        CHECK(lp_maximize(v({1.0}), m({{-1}}), v({0.0})).status == LpStatus::Unbounded);
        CHECK(lp_maximize(v({1.0}), m({{-1}, {1}}), v({-1.0, 0.0})).status == LpStatus::Infeasible);
    }

    TEST_CASE("degenerate vertex does not cycle") {
        // many constraints through the optimum
        Mat a(6, 2);
        a << 1, 0, 0, 1, 1, 1, 2, 1, 1, 2, 3, 3;
        const LpResult r = lp_maximize(v({1.0, 1.0}), a, v({1.0, 1.0, 2.0, 3.0, 3.0, 6.0}));
        REQUIRE(r.status == LpStatus::Optimal);
        CHECK(r.value == doctest::Approx(2.0));
    }
}

TEST_SUITE("geometry") {
    TEST_CASE("region_hrep on the one-knot net") {
        const auto net = knot_net();
        const auto plus = region_hrep(net, activation_code(net, v({1.0})));
        const auto red = plus.subset(reduce_inequalities(plus));
        REQUIRE(red.faces() == 1);
        CHECK(red.normals(0, 0) == doctest::Approx(-1.0));  // -z <= 0
        const auto minus = region_hrep(net, activation_code(net, v({-1.0})));
        const auto red2 = minus.subset(reduce_inequalities(minus));
        REQUIRE(red2.faces() == 1);
        CHECK(red2.normals(0, 0) == doctest::Approx(1.0));
        ActivationCode both{{{1, 1}}};
        CHECK_FALSE(interior_point(with_box(region_hrep(net, both), 8.0)).has_value());
    }

    TEST_CASE("interior points") {
        auto p = interior_point(poly(m({{-1}, {1}}), v({0.0, 1.0})));
        REQUIRE(p);
        CHECK((*p)[0] == doctest::Approx(0.5));
        CHECK_FALSE(interior_point(poly(m({{-1}, {1}}), v({-1.0, 0.0}))));
        auto q = interior_point(poly(m({{-1, 0}, {1, 0}, {0, -1}, {0, 1}}), v({0.0, 1.0, 0.0, 1.0})));
        REQUIRE(q);
        CHECK((*q)[0] == doctest::Approx(0.5));
        CHECK((*q)[1] == doctest::Approx(0.5));
    }

    TEST_CASE("redundancy removal") {
        // z >= 0, z >= -1, z <= 2
        const auto keep = reduce_inequalities(poly(m({{-1}, {-1}, {1}}), v({0.0, 1.0, 2.0})));
        CHECK(keep == std::vector<int>{0, 2});
        const auto dup = reduce_inequalities(poly(m({{-1}, {-1}, {1}}), v({0.0, 0.0, 2.0})));
        CHECK(dup.size() == 2);
    }

    TEST_CASE("vertex enumeration") {
        auto v1 = vertex_enumeration(poly(m({{-1}, {1}}), v({0.0, 1.0})));
        REQUIRE(v1.size() == 2);
        CHECK(v1[0][0] == doctest::Approx(0.0));
        CHECK(v1[1][0] == doctest::Approx(1.0));
        auto sq = vertex_enumeration(poly(m({{-1, 0}, {1, 0}, {0, -1}, {0, 1}}), v({0.0, 1.0, 0.0, 1.0})));
        CHECK(sq.size() == 4);
        auto half = vertex_enumeration(with_box(poly(m({{-1, 0}}), v({0.0})), 8.0));
        CHECK(half.size() == 4);
        CHECK_THROWS_AS(vertex_enumeration(poly(m({{-1, 0}, {1, 0}}), v({0.0, 1.0}))), NumericalError);
    }

    TEST_CASE("facet count agrees with vertex adjacency on random 2D regions") {
        const auto net = random_net("2-6-2 relu", 21);
        PartitionOptions opt;
        opt.bounding_radius = 8.0;
        const Partition part = enumerate_partition(net, Vec::Zero(2), opt);
        for (const Region& r : part.regions) {
            // in 2D every facet carries exactly two vertices and each vertex two facets
            CHECK(r.hrep.faces() == static_cast<int>(r.vertices.size()));
            int on = 0;
            for (int f = 0; f < r.hrep.faces(); ++f) {
                on = 0;
                const double len = r.hrep.normals.row(f).norm();
                for (const Vec& p : r.vertices)
                    if (std::fabs(r.hrep.normals.row(f).dot(p) - r.hrep.offsets[f]) < 1e-7 * len) ++on;
                CHECK(on == 2);
            }
        }
    }

    TEST_CASE("triangulation") {
        CHECK(triangulate({v({0.0}), v({1.0})}).size() == 1);
        const auto sq = triangulate({v({0, 0}), v({1, 0}), v({1, 1}), v({0, 1})});
        REQUIRE(sq.size() == 2);
        CHECK(sq[0].volume() == doctest::Approx(0.5));
        CHECK(sq[1].volume() == doctest::Approx(0.5));
        // pentagon -> 3 simplices
        std::vector<Vec> pent;
        for (int i = 0; i < 5; ++i) pent.push_back(v({std::cos(2 * M_PI * i / 5), std::sin(2 * M_PI * i / 5)}));
        const auto tp = triangulate(pent);
        CHECK(tp.size() == 3);
        double area = 0.0;
        for (const auto& t : tp) area += t.volume();
        CHECK(area == doctest::Approx(2.5 * std::sin(2 * M_PI / 5)).epsilon(1e-12));
        // unit cube -> volume 1
        std::vector<Vec> cube;
        for (int i = 0; i < 8; ++i) cube.push_back(v({double(i & 1), double((i >> 1) & 1), double((i >> 2) & 1)}));
        double vol = 0.0;
        for (const auto& t : triangulate(cube)) vol += t.volume();
        CHECK(vol == doctest::Approx(1.0).epsilon(1e-12));
        CHECK_THROWS_AS(triangulate({v({0, 0}), v({1, 1}), v({2, 2})}), NumericalError);
    }

    TEST_CASE("cone decomposition") {
        const auto seg = cone_decomposition(Simplex{{v({0.5}), v({2.0})}});
        CHECK(seg.pieces.size() == 2);
        CHECK(seg.full_space_sign == -1);
        // telescoping signed lengths on a wide window [-L, L]
        const double L = 100.0;
        double len = seg.full_space_sign * 2 * L;
        for (const auto& p : seg.pieces) {
            const double r = p.transform(0, 0), lo = p.lower[0];
            // {r z >= lo} within [-L, L]
            const double a = r > 0 ? lo / r : -L, b = r > 0 ? L : lo / r;
            len += p.sign * (b - a);
        }
        CHECK(len == doctest::Approx(1.5));
        const auto tri = cone_decomposition(Simplex{{v({0, 0}), v({1, 0}), v({0, 1})}});
        CHECK(tri.pieces.size() == 6);
        const auto tet = cone_decomposition(Simplex{{v({0, 0, 0}), v({1, 0, 0}), v({0, 1, 0}), v({0, 0, 1})}});
        CHECK(tet.pieces.size() == 14);
        // flat limit: signed mass of a wide Gaussian ~ area * density at the centre
        const double var = 1e4;
        const double e0 = region_mass(tri, Vec::Zero(2), var * Mat::Identity(2, 2));
        CHECK(e0 == doctest::Approx(0.5 / (2 * M_PI * var)).epsilon(1e-3));
    }

    TEST_CASE("partition of the one-knot net") {
        PartitionOptions opt;
        const Partition p = enumerate_partition(knot_net(), v({0.5}), opt);
        REQUIRE(p.size() == 2);
        CHECK(p.regions[0].code.str() == "-+");
        CHECK(p.regions[1].code.str() == "+-");
        CHECK(p.regions[0].clipped);
        CHECK(partition_volume(p) == doctest::Approx(16.0));
    }

    TEST_CASE("S=1 region count equals distinct codes on a fine grid") {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            const auto net = random_net("1-7-2 relu", seed);
            PartitionOptions opt;
            const Partition p = enumerate_partition(net, Vec::Zero(1), opt);
            std::set<ActivationCode> grid;
            for (int i = 0; i < 200001; ++i) grid.insert(activation_code(net, v({-8.0 + 16.0 * (i + 0.5) / 200001})));
            CHECK(p.size() == grid.size());
            for (const auto& c : grid) CHECK(p.find(c) >= 0);
        }
    }

    TEST_CASE("random 2D partitions: sampling completeness, box volume, symmetric neighbours") {
        for (const char* spec : {"2-6-2 relu", "2-4-4-3 leaky_relu:0.3", "2-5-3-2 abs"}) {
            const auto net = random_net(spec, 17);
            PartitionOptions opt;
            const Partition p = enumerate_partition(net, Vec::Zero(2), opt);
            CHECK(partition_volume(p) == doctest::Approx(256.0).epsilon(1e-8));
            Rng rng(99);
            int missing = 0;
            for (int i = 0; i < 100000; ++i) {
                const Vec z = v({rng.normal(), rng.normal()});
                if (p.find(activation_code(net, z)) < 0) ++missing;
            }
            CHECK(missing == 0);
            for (const Region& r : p.regions) CHECK(activation_code(net, r.interior) == r.code);
            // regions sharing a non-box facet see each other
            for (const Region& r : p.regions) {
                for (int f = 0; f < r.hrep.faces(); ++f) {
                    if (r.hrep.face_origin[static_cast<std::size_t>(f)].is_box()) continue;
                    const double len = r.hrep.normals.row(f).norm();
                    const Vec n = r.hrep.normals.row(f).transpose() / len;
                    const double c = r.hrep.offsets[f] / len;
                    int partners = 0;
                    for (const Region& o : p.regions) {
                        for (int g = 0; g < o.hrep.faces(); ++g) {
                            const double l2 = o.hrep.normals.row(g).norm();
                            const Vec n2 = o.hrep.normals.row(g).transpose() / l2;
                            if ((n + n2).cwiseAbs().maxCoeff() < 1e-8 && std::fabs(c + o.hrep.offsets[g] / l2) < 1e-8)
                                ++partners;
                        }
                    }
                    CHECK(partners >= 1);
                }
            }
        }
    }

    TEST_CASE("region cap raises a resource error") {
        PartitionOptions opt;
        opt.max_regions = 1;
        CHECK_THROWS_AS(enumerate_partition(knot_net(), v({0.5}), opt), ResourceError);
    }
}

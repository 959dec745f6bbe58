#include "helpers.hpp"

#include "cpaem/errors.hpp"
#include "cpaem/gaussian.hpp"
#include "cpaem/geometry.hpp"
#include "cpaem/oracle.hpp"
#include "cpaem/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace cpaem;
using namespace testnets;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ConeDecomposition cones_of(const std::vector<Vec>& verts) {
    ConeDecomposition c;
    for (const auto& s : triangulate(verts)) c.append(cone_decomposition(s));
    return c;
}

PolytopeH hull_hrep(const std::vector<Vec>& tri) {
    // triangle (counter-clockwise) as three half-planes
    PolytopeH h;
    h.normals.resize(3, 2);
    h.offsets.resize(3);
    for (int i = 0; i < 3; ++i) {
        const Vec& a = tri[static_cast<std::size_t>(i)];
        const Vec& b = tri[static_cast<std::size_t>((i + 1) % 3)];
        Vec n(2);
        n << (b - a)[1], -(b - a)[0];
        h.normals.row(i) = n.transpose();
        h.offsets[i] = n.dot(a);
        h.face_origin.push_back(FaceOrigin{1, i});
    }
    return h;
}

Mat random_spd(int s, Rng& rng) {
    Mat a(s, s);
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < s; ++j) a(i, j) = rng.normal();
    return a * a.transpose() + 0.3 * Mat::Identity(s, s);
}

}  // namespace

TEST_SUITE("gaussian") {
    TEST_CASE("mvn_logpdf") {
        CHECK(mvn_logpdf(Vec::Zero(3), Vec::Zero(3), SpdMatrix(Mat::Identity(3, 3))) ==
              doctest::Approx(-1.5 * std::log(2 * M_PI)));
        CHECK(mvn_logpdf(v({1.0}), v({0.0}), SpdMatrix(Mat::Identity(1, 1))) ==
              doctest::Approx(-0.5 - 0.5 * std::log(2 * M_PI)));
        const Mat s = m({{2.0, 0.3, 0.1}, {0.3, 1.0, -0.2}, {0.1, -0.2, 0.5}});
        const Vec x = v({0.4, -0.3, 0.9}), mu = v({0.1, 0.2, 0.3});
        const double direct = -0.5 * ((x - mu).dot(s.inverse() * (x - mu)) + std::log((2 * M_PI * s).determinant()));
        CHECK(mvn_logpdf(x, mu, SpdMatrix(s)) == doctest::Approx(direct).epsilon(1e-12));
    }

    TEST_CASE("bivariate upper orthant") {
        CHECK(bvn_upper(0, 0, 0) == doctest::Approx(0.25));
        for (double r : {-0.99, -0.9, -0.5, -0.1, 0.2, 0.6, 0.8, 0.93, 0.999})
            CHECK(std::fabs(bvn_upper(0, 0, r) - (0.25 + std::asin(r) / (2 * M_PI))) < 1e-14);
        // frozen values from an independent adaptive quadrature
        CHECK(std::fabs(bvn_upper(0.5, -0.3, 0.4) - 0.2435758892011047) < 1e-14);
        CHECK(std::fabs(bvn_upper(-1.2, 0.7, -0.85) - 0.1405662399670409) < 1e-14);
        CHECK(std::fabs(bvn_upper(1.1, 1.3, 0.95) - 0.08700925930191955) < 1e-14);
        CHECK(std::fabs(bvn_upper(0.2, -0.4, -0.97) - 0.08711355462005492) < 1e-14);
        CHECK(std::fabs(bvn_upper(2.5, -2.0, 0.6) - 0.006209648101440327) < 1e-14);
        CHECK(std::fabs(bvn_upper(-0.7, -0.2, 0.999) - 0.5792597094391031) < 1e-12);
    }

    TEST_CASE("rect_cdf") {
        CHECK(rect_cdf(v({0.0}), Mat::Identity(1, 1)) == doctest::Approx(0.5));
        CHECK(rect_cdf(v({0.0, 0.0}), Mat::Identity(2, 2)) == doctest::Approx(0.25));
        CHECK(rect_cdf(v({-kInf, 0.3}), m({{1.0, 0.5}, {0.5, 2.0}})) == doctest::Approx(normal_sf(0.3 / std::sqrt(2.0))));
        CHECK(rect_cdf(v({-kInf, -kInf}), Mat::Identity(2, 2)) == 1.0);
        const Mat s3 = m({{1, 0.5, 0.3}, {0.5, 2, -0.4}, {0.3, -0.4, 1.5}});
        CHECK(std::fabs(rect_cdf(v({0.2, -0.1, 0.4}), s3) - 0.10845044931724986) < 1e-10);
        CHECK(std::fabs(rect_cdf(v({0, 0, 0}), Mat::Identity(3, 3)) - 0.125) < 1e-12);
        CHECK_THROWS_AS(rect_cdf(v({0, 0, 0, 0}), Mat::Identity(4, 4)), InputError);
    }

    TEST_CASE("F and G") {
        const double phi0 = 1.0 / std::sqrt(2 * M_PI);
        CHECK(F_vector(v({0.0}), Mat::Identity(1, 1))[0] == doctest::Approx(phi0));
        CHECK(F_vector(v({-kInf}), Mat::Identity(1, 1))[0] == 0.0);
        const Vec f2 = F_vector(v({0.0, 0.0}), Mat::Identity(2, 2));
        CHECK(f2[0] == doctest::Approx(0.5 * phi0));
        CHECK(f2[1] == doctest::Approx(0.5 * phi0));
        CHECK(G_matrix(v({0.0}), Mat::Identity(1, 1))(0, 0) == 0.0);
        CHECK(G_matrix(v({0.0, 0.0}), Mat::Identity(2, 2))(0, 1) == doctest::Approx(1.0 / (2 * M_PI)));
        CHECK(G_matrix(v({-kInf, -kInf}), Mat::Identity(2, 2)).isZero());
        const Mat s3 = m({{1, 0.5, 0.3}, {0.5, 2, -0.4}, {0.3, -0.4, 1.5}});
        CHECK(std::fabs(G_matrix(v({0.2, -0.1, 0.4}), s3)(0, 1) - 0.04682328368677145) < 1e-13);
        CHECK(std::fabs(F_vector(v({0.2, -0.1, 0.4}), s3)[0] - 0.06357878157041569) < 1e-12);
    }

    TEST_CASE("orthant moments") {
        const auto a = orthant_moments(v({0.0}), Mat::Identity(1, 1));
        CHECK(a.p0 == doctest::Approx(0.5));
        CHECK(a.m1[0] == doctest::Approx(1.0 / std::sqrt(2 * M_PI)));
        CHECK(a.m2(0, 0) == doctest::Approx(0.5));
        const auto b = orthant_moments(v({-kInf}), Mat::Identity(1, 1));
        CHECK(b.p0 == 1.0);
        CHECK(b.m1[0] == 0.0);
        CHECK(b.m2(0, 0) == 1.0);
        const auto c = orthant_moments(v({0.0, 0.0}), Mat::Identity(2, 2));
        CHECK(c.m2(0, 0) == doctest::Approx(0.25));
        CHECK(c.m2(0, 1) == doctest::Approx(1.0 / (2 * M_PI)));
        // correlated case pins the sign of the diagonal correction in H
        const auto d = orthant_moments(v({0.3, -0.5}), m({{1.5, 0.6}, {0.6, 0.8}}));
        CHECK(std::fabs(d.p0 - 0.35856318815840843) < 1e-12);
        CHECK(std::fabs(d.m1[0] - 0.4359584546865201) < 1e-12);
        CHECK(std::fabs(d.m1[1] - 0.22887030283923654) < 1e-12);
        CHECK(std::fabs(d.m2(0, 0) - 0.7045510774551584) < 1e-12);
        CHECK(std::fabs(d.m2(0, 1) - 0.331690682162269) < 1e-12);
        CHECK(std::fabs(d.m2(1, 1) - 0.3062281977513021) < 1e-12);
    }

    TEST_CASE("region moments: closed forms and frozen triangle") {
        const auto seg = cones_of({v({-1.0}), v({1.0})});
        const RegionMoments r = region_moments(seg, v({0.0}), Mat::Identity(1, 1));
        CHECK(std::fabs(r.e0 - std::erf(1 / std::sqrt(2.0))) < 1e-12);
        CHECK(std::fabs(r.e1[0]) < 1e-14);
        CHECK(std::fabs(r.e2(0, 0) - 0.198748043098799) < 1e-12);

        const auto box = cones_of({v({-8, -8}), v({8, -8}), v({8, 8}), v({-8, 8})});
        const RegionMoments b = region_moments(box, Vec::Zero(2), Mat::Identity(2, 2));
        CHECK(b.e0 > 1.0 - 1e-12);
        CHECK(b.e1.cwiseAbs().maxCoeff() < 1e-12);
        CHECK((b.e2 - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);

        const std::vector<Vec> tri{v({0, 0}), v({1, 0.2}), v({0.3, 1.1})};
        const RegionMoments t = region_moments_at(cones_of(tri), v({0.2, -0.1}), m({{1.0, 0.3}, {0.3, 0.5}}));
        CHECK(std::fabs(t.e0 - 0.09165026819797784) < 1e-12);
        CHECK(std::fabs(t.e1[0] - 0.0400010149478513) < 1e-12);
        CHECK(std::fabs(t.e1[1] - 0.03406053520790155) < 1e-12);
        CHECK(std::fabs(t.e2(0, 0) - 0.02181700710091638) < 1e-12);
        CHECK(std::fabs(t.e2(0, 1) - 0.01505317117228366) < 1e-12);
        CHECK(std::fabs(t.e2(1, 1) - 0.01676125530423988) < 1e-12);
    }

    TEST_CASE("region moments against the quadrature oracle on random triangles") {
        Rng rng(2024);
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<Vec> tri;
            for (int i = 0; i < 3; ++i) tri.push_back(v({rng.normal(), rng.normal()}));
            const double cross = (tri[1] - tri[0])[0] * (tri[2] - tri[0])[1] - (tri[1] - tri[0])[1] * (tri[2] - tri[0])[0];
            if (cross < 0) std::swap(tri[1], tri[2]);
            const Mat cov = random_spd(2, rng);
            const Vec mu = v({0.5 * rng.normal(), 0.5 * rng.normal()});
            const RegionMoments a = region_moments_at(cones_of(tri), mu, cov);
            const QuadMoments q = quad_region_moments(hull_hrep(tri), mu, cov, 2001);
            CHECK(std::fabs(a.e0 - q.value.e0) < 1e-5);
            CHECK((a.e1 - q.value.e1).cwiseAbs().maxCoeff() < 1e-5);
            CHECK((a.e2 - q.value.e2).cwiseAbs().maxCoeff() < 1e-5);
        }
    }

    TEST_CASE("additivity over a split polygon and monotone interval mass") {
        const std::vector<Vec> quad{v({0, 0}), v({1, 0}), v({1.2, 0.9}), v({0.1, 1.0})};
        const Mat cov = m({{0.7, 0.2}, {0.2, 0.4}});
        const Vec mu = v({0.3, 0.2});
        const RegionMoments whole = region_moments(cones_of(quad), mu, cov);
        RegionMoments sum{0.0, Vec::Zero(2), Mat::Zero(2, 2)};
        for (const auto& s : triangulate(quad)) {
            const RegionMoments p = region_moments(cone_decomposition(s), mu, cov);
            sum.e0 += p.e0;
            sum.e1 += p.e1;
            sum.e2 += p.e2;
        }
        CHECK(std::fabs(whole.e0 - sum.e0) < 1e-8);
        CHECK((whole.e1 - sum.e1).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((whole.e2 - sum.e2).cwiseAbs().maxCoeff() < 1e-8);

        double prev = 2.0;
        for (double w = 3.0; w > 0.05; w *= 0.7) {
            const double e = region_mass(cones_of({v({-w}), v({0.5 * w})}), v({0.0}), Mat::Identity(1, 1));
            CHECK(e < prev);
            prev = e;
        }
    }

    TEST_CASE("prior masses of random partitions sum to one") {
        for (const char* spec : {"1-8-2 relu", "2-6-2 relu", "2-4-4-2 leaky_relu:0.2"}) {
            const auto net = random_net(spec, 8);
            PartitionOptions opt;
            const Partition p = enumerate_partition(net, Vec::Zero(net.latent_dim()), opt);
            double total = 0.0;
            for (const Region& r : p.regions)
                total += region_mass(r.cones, Vec::Zero(net.latent_dim()), Mat::Identity(net.latent_dim(), net.latent_dim()));
            CHECK(std::fabs(total - 1.0) < 1e-6);
        }
    }
}

#pragma once

#include "cpaem/geometry.hpp"
#include "cpaem/linalg.hpp"

namespace cpaem {

/// Standard normal upper tail P(Z >= x).
double normal_sf(double x) noexcept;
/// Standard normal CDF.
double normal_cdf(double x) noexcept;

/// P(X >= h, Y >= k) for a standard bivariate normal with correlation r.
double bvn_upper(double h, double k, double r) noexcept;

/// P(Z >= lower) for Z ~ N(0, cov), k = lower.size() <= 3. Entries equal to
/// -inf are marginalized out; an empty constraint set has probability 1.
double rect_cdf(const Vec& lower, const Mat& cov);

struct MvnParams {
    Vec mean;
    SpdMatrix cov;

    MvnParams(Vec m, const Mat& c) : mean(std::move(m)), cov(c, "covariance") {}
};

double mvn_logpdf(const Vec& x, const Vec& mean, const SpdMatrix& cov);
inline double mvn_logpdf(const Vec& x, const MvnParams& p) { return mvn_logpdf(x, p.mean, p.cov); }

/// [F]_k = phi(a_k; 0, S_kk) P(Z_{-k} >= a_{-k} | Z_k = a_k); zero where a_k = -inf.
Vec F_vector(const Vec& a, const Mat& cov);
/// [G]_kl (k != l) = phi_2(a_k, a_l) P(rest >= a_rest | Z_k = a_k, Z_l = a_l);
/// zero diagonal, zero rows/columns where a is -inf.
Mat G_matrix(const Vec& a, const Mat& cov);

struct OrthantMoments {
    double p0 = 0.0;
    Vec m1;
    Mat m2;
};

/// Zeroth, first and second moments of N(0, cov) over {z >= a}.
OrthantMoments orthant_moments(const Vec& a, const Mat& cov);

/// Unnormalized moments of a density over a set: e0 = mass, e1 = first
/// moment, e2 = second (non-central) moment.
struct RegionMoments {
    double e0 = 0.0;
    Vec e1;
    Mat e2;
};

/// Moments of N(0, cov) over (region - shift), where the region is given by
/// its signed pieces. Pieces are stated for the unshifted region; the shift
/// moves each lower limit by -R shift.
RegionMoments region_moments(const ConeDecomposition& cones, const Vec& shift, const Mat& cov);

/// e0 alone, skipping the first and second moment terms.
double region_mass(const ConeDecomposition& cones, const Vec& shift, const Mat& cov);

/// Moments of N(mean, cov) over the region itself (recentred form).
RegionMoments region_moments_at(const ConeDecomposition& cones, const Vec& mean, const Mat& cov);

}  // namespace cpaem

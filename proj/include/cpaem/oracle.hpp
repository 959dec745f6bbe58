#pragma once

#include "cpaem/gaussian.hpp"
#include "cpaem/geometry.hpp"
#include "cpaem/network.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace cpaem {

/// Brute-force estimate. Scalars are 1x1, vectors k x 1. `stderr_` holds a
/// standard error for sampling estimators and an absolute error bound for
/// quadrature.
struct OracleEstimate {
    Mat value;
    Mat stderr_;
    std::uint64_t n_samples = 0;
    std::uint64_t seed = 0;
    std::string note;

    double scalar() const { return value(0, 0); }
    double scalar_stderr() const { return stderr_(0, 0); }
};

/// Mean of phi(x; g(z_i), Sx) over z_i ~ N(0, Sz).
OracleEstimate mc_marginal(const Vec& x, const GenerativeNetwork& net, const NoiseModel& noise,
                           std::uint64_t n, std::uint64_t seed);

struct IsPosteriorEstimate {
    std::map<ActivationCode, OracleEstimate> share;  // posterior mass per code
    OracleEstimate e1;
    OracleEstimate e2;
    double ess = 0.0;
    bool low_ess = false;
};

/// Self-normalized importance sampling with the prior as proposal. Standard
/// errors come from 200 bootstrap resamples of fixed sample blocks.
IsPosteriorEstimate is_posterior_moments(const Vec& x, const GenerativeNetwork& net, const NoiseModel& noise,
                                         std::uint64_t n, std::uint64_t seed);

/// IS estimate of E_{z|x}[log p(x|z) + log p(z)], with a delta-method
/// standard error for the self-normalized ratio.
OracleEstimate is_expected_complete_ll(const Vec& x, const GenerativeNetwork& net, const NoiseModel& noise,
                                       std::uint64_t n, std::uint64_t seed);

struct QuadMoments {
    RegionMoments value;
    double error = 0.0;  // max abs difference between the two grids
    std::size_t grid = 0;
};

/// Quadrature moments of N(mean, cov) over a polytope (S <= 2). The grid
/// covers the polytope's bounding box intersected with mean +/- 12 sd. In 2D
/// the rows are exact one-dimensional normal integrals and composite Simpson,
/// broken at vertex heights, runs over the second axis. The error estimate compares `grid` and
/// `grid / 2` cells.
QuadMoments quad_region_moments(const PolytopeH& region, const Vec& mean, const Mat& cov, std::size_t grid = 2001);

/// Fraction of prior samples whose activation code is `code`.
OracleEstimate mc_region_mass(const GenerativeNetwork& net, const ActivationCode& code, const Mat& sigma_z,
                              std::uint64_t n, std::uint64_t seed);

/// Sample counts of every code hit by n prior samples.
std::map<ActivationCode, std::uint64_t> mc_code_counts(const GenerativeNetwork& net, const Mat& sigma_z,
                                                       std::uint64_t n, std::uint64_t seed);

}  // namespace cpaem

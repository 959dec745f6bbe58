#pragma once

#include "cpaem/gaussian.hpp"
#include "cpaem/geometry.hpp"
#include "cpaem/network.hpp"

#include <vector>

namespace cpaem {

/// Per-region conditional Gaussian: on region w, p(x, z) = kappa * N(z; mu, sigma).
struct RegionPosterior {
    Vec mu;
    SpdMatrix sigma;
    double log_kappa = 0.0;
};

struct RegionTerm {
    int region = -1;   // index into Partition::regions
    double weight = 0.0;  // posterior mass of the region, e0_w(x)
    Vec e1;            // E[z 1{z in w} | x]
    Mat e2;            // E[z z^T 1{z in w} | x]
};

struct PosteriorSummary {
    double log_marginal = 0.0;
    std::vector<RegionTerm> per_region;  // regions with non-negligible weight
    Vec total_e1;
    Mat total_e2;
};

RegionPosterior region_posterior_params(const Vec& x, const AffineMap& affine, const NoiseModel& noise);

/// Exact inference over an enumerated partition. Region-level factors that do
/// not depend on x are computed once at construction.
class ExactPosterior {
public:
    ExactPosterior(const Partition& partition, const NoiseModel& noise);

    RegionPosterior region_params(const Vec& x, int region) const;
    double log_marginal(const Vec& x) const;
    PosteriorSummary moments(const Vec& x) const;
    /// log p(z | x); -inf outside the bounding box or enumerated regions.
    double log_density(const Vec& z, const Vec& x, const GenerativeNetwork& net) const;
    /// argmax_z log p(x, z) over the clipped latent box.
    Vec map_latent(const Vec& x) const;

    const Partition& partition() const noexcept { return partition_; }
    const NoiseModel& noise() const noexcept { return noise_; }

private:
    struct Cached {
        SpdMatrix sigma;     // (Sz^-1 + A^T Sx^-1 A)^-1
        Mat gain;            // sigma A^T Sx^-1
        SpdMatrix evidence;  // Sx + A Sz A^T
    };
    // log kappa + log e0 for every region, plus the centred moments
    struct Piece {
        double log_mass;
        RegionMoments centred;
        Vec mu;
    };
    Piece region_piece(const Vec& x, int region, bool need_moments) const;

    const Partition& partition_;
    const NoiseModel& noise_;
    std::vector<Cached> cache_;
};

double log_marginal(const Vec& x, const Partition& partition, const NoiseModel& noise);
PosteriorSummary posterior_moments(const Vec& x, const Partition& partition, const NoiseModel& noise);
double posterior_logdensity(const Vec& z, const Vec& x, const GenerativeNetwork& net,
                            const Partition& partition, const NoiseModel& noise);
Vec map_latent(const Vec& x, const Partition& partition, const NoiseModel& noise);
double dataset_nll(const std::vector<Vec>& data, const Partition& partition, const NoiseModel& noise);

/// Prior mass outside the enumerated (clipped) regions: 1 - sum_w e0_w(0, Sz).
double prior_tail_mass(const Partition& partition, const NoiseModel& noise);

double log_sum_exp(const std::vector<double>& v);

}  // namespace cpaem

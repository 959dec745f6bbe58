#pragma once

#include "cpaem/geometry.hpp"
#include "cpaem/inference.hpp"
#include "cpaem/network.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace cpaem {

/// Posterior summaries of a dataset under one fixed set of parameters. The
/// fingerprint ties the cache to those parameters; using it with any other
/// network or noise model is a contract violation.
struct EStepCache {
    std::shared_ptr<const Partition> partition;
    std::vector<PosteriorSummary> summaries;
    std::uint64_t fingerprint = 0;
    double nll = 0.0;

    std::size_t size() const noexcept { return summaries.size(); }
};

std::uint64_t parameter_fingerprint(const GenerativeNetwork& net, const NoiseModel& noise, double radius);

struct EStepOptions {
    double bounding_radius = 0.0;  // <= 0: 8 prior standard deviations
    std::size_t max_regions = 1000000;
};

EStepCache e_step(const std::vector<Vec>& data, const GenerativeNetwork& net, const NoiseModel& noise,
                  const EStepOptions& options = {});

/// E_{z|x}[log p(x|z) + log p(z)] in closed form from one posterior summary.
/// Each region's affine map is rebuilt from `net` and the region's code, so
/// the value can also be read as the frozen-posterior objective at new
/// parameters.
double expected_complete_ll(const Vec& x, const PosteriorSummary& summary, const GenerativeNetwork& net,
                            const Partition& partition, const NoiseModel& noise);

/// Sum over the dataset, checking that the cache is fresh for (net, noise).
double expected_complete_ll(const std::vector<Vec>& data, const EStepCache& cache,
                            const GenerativeNetwork& net, const NoiseModel& noise);

/// Same sum with no freshness check: the posterior stays frozen while the
/// parameters move. This is the objective each M-step maximizes.
double frozen_objective(const std::vector<Vec>& data, const EStepCache& cache, const GenerativeNetwork& net,
                        const NoiseModel& noise);

Vec m_step_bias(int l, const std::vector<Vec>& data, const EStepCache& cache, const GenerativeNetwork& net,
                const NoiseModel& noise, double ridge = 1e-9);
Mat m_step_weight(int l, const std::vector<Vec>& data, const EStepCache& cache, const GenerativeNetwork& net,
                  const NoiseModel& noise, double ridge = 1e-9);

enum class CovarianceForm { Full, Diagonal, Isotropic };

Mat m_step_sigma_x(const std::vector<Vec>& data, const EStepCache& cache, const GenerativeNetwork& net,
                   CovarianceForm form = CovarianceForm::Isotropic);
Mat m_step_sigma_z(const EStepCache& cache);

struct EmConfig {
    int max_iters = 50;
    double nll_tolerance = 1e-6;
    bool update_sigma_x = true;
    bool update_sigma_z = false;
    bool update_biases = true;
    bool update_weights = true;
    CovarianceForm sigma_x_form = CovarianceForm::Isotropic;
    double bounding_radius = 0.0;  // <= 0: 8 prior standard deviations
    std::size_t max_regions = 1000000;
    double monotonicity_slack = 1e-8;
    double ridge = 1e-9;
    /// Step-halving on a parameter group whose full update would raise the
    /// NLL (the update moves the partition, which the frozen-code objective
    /// does not see).
    bool backtrack = true;
    int max_halvings = 30;

    bool any_update() const noexcept { return update_sigma_x || update_sigma_z || update_biases || update_weights; }
};

struct EmTraceRow {
    int iteration = 0;
    double nll = 0.0;
    std::size_t card_omega = 0;
    double wall_ms = 0.0;
    int halvings = 0;
};

struct EmResult {
    GenerativeNetwork net;
    NoiseModel noise;
    std::vector<EmTraceRow> trace;
    bool converged = false;
};

EmResult em_fit(const std::vector<Vec>& data, const GenerativeNetwork& net, const NoiseModel& noise,
                const EmConfig& config);

/// "sigma_x,biases,weights,sigma_z" style list into the update flags.
void parse_update_flags(const std::string& list, EmConfig& config);

}  // namespace cpaem

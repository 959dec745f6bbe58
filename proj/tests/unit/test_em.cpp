#include "helpers.hpp"
#include "../common/powell.hpp"

#include "cpaem/datasets.hpp"
#include "cpaem/em.hpp"
#include "cpaem/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace cpaem;
using namespace testnets;

namespace {

double linear_ecll(const Vec& x, const Mat& w, const Vec& b, const Mat& sx, const Mat& sz) {
    const Mat post = (sz.inverse() + w.transpose() * sx.inverse() * w).inverse();
    const Vec mu = post * w.transpose() * sx.inverse() * (x - b);
    return mvn_logpdf(x, w * mu + b, SpdMatrix(sx)) - 0.5 * (sx.inverse() * w * post * w.transpose()).trace() +
           mvn_logpdf(mu, Vec::Zero(mu.size()), SpdMatrix(sz)) - 0.5 * (sz.inverse() * post).trace();
}

struct Setup {
    GenerativeNetwork net;
    NoiseModel noise;
    std::vector<Vec> data;
};

Setup small_setup(std::uint64_t seed) {
    auto truth = random_net("1-3-2 relu", seed);
    const NoiseModel noise = NoiseModel::isotropic(2, 0.05, 1);
    auto data = model_dataset(20, truth, noise, seed + 100);
    auto start = random_net("1-3-2 relu", seed + 1000);
    return {start, NoiseModel::isotropic(2, 0.2, 1), data};
}

}  // namespace

TEST_SUITE("em") {
    TEST_CASE("expected complete log-likelihood matches the linear closed form") {
        const Mat w = m({{0.9, -0.2}, {0.4, 1.1}});
        const Vec b = v({0.3, -0.1});
        const auto net = linear_net(w, b);
        const NoiseModel noise(m({{0.2, 0.03}, {0.03, 0.1}}), m({{1.0, 0.1}, {0.1, 0.6}}));
        const std::vector<Vec> data{v({0.5, 0.2}), v({-1.0, 0.7}), v({0.0, 0.0})};
        const EStepCache cache = e_step(data, net, noise);
        double total = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double q = expected_complete_ll(data[i], cache.summaries[i], net, *cache.partition, noise);
            const double closed = linear_ecll(data[i], w, b, noise.sigma_x().matrix(), noise.sigma_z().matrix());
            CHECK(std::fabs(q - closed) < 1e-8);
            total += closed;
        }
        CHECK(std::fabs(expected_complete_ll(data, cache, net, noise) - total) < 1e-8);
    }

    TEST_CASE("stale caches are rejected") {
        const Setup s = small_setup(1);
        const EStepCache cache = e_step(s.data, s.net, s.noise);
        CHECK_NOTHROW(expected_complete_ll(s.data, cache, s.net, s.noise));
        const auto moved = s.net.with_bias(1, s.net.layer(1).bias + Vec::Constant(3, 0.01));
        CHECK_THROWS_AS(expected_complete_ll(s.data, cache, moved, s.noise), ContractViolation);
        CHECK_THROWS_AS(expected_complete_ll(s.data, cache, s.net, NoiseModel::isotropic(2, 0.3, 1)), ContractViolation);
        CHECK_NOTHROW(frozen_objective(s.data, cache, moved, s.noise));
        CHECK_THROWS_AS(frozen_objective({s.data[0]}, cache, s.net, s.noise), ContractViolation);
    }

    TEST_CASE("single affine layer: updates are least squares") {
        const Mat w = m({{0.7}, {-0.4}});
        const Vec b = v({0.1, 0.2});
        const auto net = linear_net(w, b);
        const NoiseModel noise = NoiseModel::isotropic(2, 0.1, 1);
        const std::vector<Vec> data{v({0.5, 0.2}), v({-1.0, 0.7}), v({0.3, -0.4}), v({1.2, 0.1})};
        const EStepCache cache = e_step(data, net, noise);
        Vec ez_sum = Vec::Zero(1);
        Vec x_sum = Vec::Zero(2);
        Mat xz = Mat::Zero(2, 1), zz = Mat::Zero(1, 1);
        for (std::size_t i = 0; i < data.size(); ++i) {
            ez_sum += cache.summaries[i].total_e1;
            x_sum += data[i];
            xz += (data[i] - b) * cache.summaries[i].total_e1.transpose();
            zz += cache.summaries[i].total_e2;
        }
        const double n = static_cast<double>(data.size());
        const Vec b_closed = (x_sum - w * ez_sum) / n;
        CHECK((m_step_bias(1, data, cache, net, noise, 0.0) - b_closed).cwiseAbs().maxCoeff() < 1e-10);
        const Mat w_closed = xz * zz.inverse();
        CHECK((m_step_weight(1, data, cache, net, noise, 0.0) - w_closed).cwiseAbs().maxCoeff() < 1e-10);
        Mat sz_closed = zz / n;
        CHECK((m_step_sigma_z(cache) - sz_closed).cwiseAbs().maxCoeff() < 1e-12);
    }

    TEST_CASE("closed-form updates maximize the frozen objective") {
        const Setup s = small_setup(7);
        const EStepCache cache = e_step(s.data, s.net, s.noise);
        for (int l = 1; l <= 2; ++l) {
            const Vec vb = m_step_bias(l, s.data, cache, s.net, s.noise);
            auto fb = [&](const Vec& p) { return frozen_objective(s.data, cache, s.net.with_bias(l, p), s.noise); };
            const Vec nb = testopt::powell_argmax(fb, s.net.layer(l).bias);
            CHECK((vb - nb).cwiseAbs().maxCoeff() < 1e-4);

            const Mat wb = m_step_weight(l, s.data, cache, s.net, s.noise);
            const Mat& w0 = s.net.layer(l).weight;
            auto fw = [&](const Vec& p) {
                return frozen_objective(s.data, cache, s.net.with_weight(l, Eigen::Map<const Mat>(p.data(), w0.rows(), w0.cols())),
                                        s.noise);
            };
            const Vec nw = testopt::powell_argmax(fw, Eigen::Map<const Vec>(w0.data(), w0.size()));
            CHECK((Eigen::Map<const Vec>(wb.data(), wb.size()) - nw).cwiseAbs().maxCoeff() < 1e-3);
        }
        const Mat sx = m_step_sigma_x(s.data, cache, s.net);
        auto fx = [&](const Vec& p) {
            if (p[0] <= 0) return -std::numeric_limits<double>::infinity();
            return frozen_objective(s.data, cache, s.net, NoiseModel(p[0] * Mat::Identity(2, 2), s.noise.sigma_z().matrix()));
        };
        CHECK(std::fabs(testopt::powell_argmax(fx, v({0.2}), 60, 1e-13, 0.05)[0] - sx(0, 0)) < 1e-4);
        const Mat sz = m_step_sigma_z(cache);
        auto fz = [&](const Vec& p) {
            if (p[0] <= 0) return -std::numeric_limits<double>::infinity();
            return frozen_objective(s.data, cache, s.net, NoiseModel(s.noise.sigma_x().matrix(), p.asDiagonal()));
        };
        CHECK(std::fabs(testopt::powell_argmax(fz, v({1.0}), 60, 1e-13, 0.2)[0] - sz(0, 0)) < 1e-4);
    }

    TEST_CASE("updates never lower the frozen objective") {
        for (std::uint64_t seed = 20; seed < 25; ++seed) {
            const Setup s = small_setup(seed);
            const EStepCache cache = e_step(s.data, s.net, s.noise);
            const double base = frozen_objective(s.data, cache, s.net, s.noise);
            for (int l = 1; l <= 2; ++l) {
                CHECK(frozen_objective(s.data, cache, s.net.with_bias(l, m_step_bias(l, s.data, cache, s.net, s.noise)),
                                       s.noise) >= base - 1e-9);
                CHECK(frozen_objective(s.data, cache,
                                       s.net.with_weight(l, m_step_weight(l, s.data, cache, s.net, s.noise)),
                                       s.noise) >= base - 1e-9);
            }
            for (auto form : {CovarianceForm::Isotropic, CovarianceForm::Diagonal, CovarianceForm::Full}) {
                const NoiseModel nx(m_step_sigma_x(s.data, cache, s.net, form), s.noise.sigma_z().matrix());
                CHECK(frozen_objective(s.data, cache, s.net, nx) >= base - 1e-9);
            }
            const NoiseModel nz(s.noise.sigma_x().matrix(), m_step_sigma_z(cache));
            CHECK(frozen_objective(s.data, cache, s.net, nz) >= base - 1e-9);
        }
    }

    TEST_CASE("covariance forms") {
        const Setup s = small_setup(3);
        const EStepCache cache = e_step(s.data, s.net, s.noise);
        const Mat full = m_step_sigma_x(s.data, cache, s.net, CovarianceForm::Full);
        const Mat diag = m_step_sigma_x(s.data, cache, s.net, CovarianceForm::Diagonal);
        const Mat iso = m_step_sigma_x(s.data, cache, s.net, CovarianceForm::Isotropic);
        CHECK((diag.diagonal() - full.diagonal()).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(diag(0, 1) == 0.0);
        CHECK(iso(0, 0) == doctest::Approx(full.trace() / 2));
        CHECK(iso(0, 0) == iso(1, 1));
    }

    TEST_CASE("EM decreases the NLL and is deterministic") {
        const Setup s = small_setup(11);
        EmConfig cfg;
        cfg.max_iters = 8;
        cfg.nll_tolerance = 0.0;
        const EmResult a = em_fit(s.data, s.net, s.noise, cfg);
        REQUIRE(a.trace.size() == 9);
        for (std::size_t i = 1; i < a.trace.size(); ++i) CHECK(a.trace[i].nll <= a.trace[i - 1].nll + 1e-8);
        CHECK(a.trace.back().nll < a.trace.front().nll);
        const EmResult b = em_fit(s.data, s.net, s.noise, cfg);
        for (std::size_t i = 0; i < a.trace.size(); ++i) CHECK(a.trace[i].nll == b.trace[i].nll);
        CHECK(a.trace.front().nll == doctest::Approx(e_step(s.data, s.net, s.noise).nll).epsilon(1e-14));

        cfg.max_iters = 50;
        cfg.nll_tolerance = 1e-3;
        CHECK(em_fit(s.data, s.net, s.noise, cfg).converged);

        EmConfig none;
        parse_update_flags("none", none);
        CHECK_FALSE(none.any_update());
        none.max_iters = 3;
        const EmResult c = em_fit(s.data, s.net, s.noise, none);
        CHECK(c.converged);
        CHECK(c.trace.size() == 2);
    }

    TEST_CASE("update flag parsing") {
        EmConfig cfg;
        parse_update_flags("sigma_z,biases", cfg);
        CHECK(cfg.update_sigma_z);
        CHECK(cfg.update_biases);
        CHECK_FALSE(cfg.update_weights);
        CHECK_FALSE(cfg.update_sigma_x);
        CHECK_THROWS_AS(parse_update_flags("bias", cfg), InputError);
        CHECK_THROWS_AS(em_fit({}, random_net("1-2-1 relu", 1), NoiseModel::isotropic(1, 0.1, 1), cfg), InputError);
    }
}

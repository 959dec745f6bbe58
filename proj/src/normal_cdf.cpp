#include "cpaem/errors.hpp"
#include "cpaem/gaussian.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace cpaem {

double normal_sf(double x) noexcept { return 0.5 * std::erfc(x / std::numbers::sqrt2); }
double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Drezner-Wesolowsky with Genz's refinements (Gauss-Legendre on the
// arcsine-substituted Plackett integral, series for |r| near 1).
double bvn_upper(double h, double k, double r) noexcept {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (h == inf || k == inf) return 0.0;
    if (h == -inf) return k == -inf ? 1.0 : normal_sf(k);
    if (k == -inf) return normal_sf(h);
    if (r == 0.0) return normal_sf(h) * normal_sf(k);

    static constexpr std::array<double, 3> w6{0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
    static constexpr std::array<double, 3> x6{0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
    static constexpr std::array<double, 6> w12{0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                                               0.2031674267230659, 0.2334925365383547, 0.2491470458134029};
    static constexpr std::array<double, 6> x12{0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                                               0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
    static constexpr std::array<double, 10> w20{0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                                                0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
                                                0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
                                                0.1527533871307259};
    static constexpr std::array<double, 10> x20{0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                                                0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                                                0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                                                0.07652652113349733};
    const double* w;
    const double* x;
    std::size_t ng;
    const double ar = std::fabs(r);
    if (ar < 0.3) {
        w = w6.data(), x = x6.data(), ng = 3;
    } else if (ar < 0.75) {
        w = w12.data(), x = x12.data(), ng = 6;
    } else {
        w = w20.data(), x = x20.data(), ng = 10;
    }
    // nodes on (0, 2): 1 - x and 1 + x, each with weight w
    std::vector<double> nodes, weights;
    for (std::size_t i = 0; i < ng; ++i) {
        nodes.push_back(1.0 - x[i]);
        weights.push_back(w[i]);
    }
    for (std::size_t i = 0; i < ng; ++i) {
        nodes.push_back(1.0 + x[i]);
        weights.push_back(w[i]);
    }

    constexpr double tp = 2.0 * std::numbers::pi;
    double hk = h * k;
    double bvn = 0.0;
    if (ar < 0.925) {
        const double hs = (h * h + k * k) / 2.0;
        const double asr = std::asin(r) / 2.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const double sn = std::sin(asr * nodes[i]);
            bvn += weights[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
        }
        bvn = bvn * asr / tp + normal_sf(h) * normal_sf(k);
    } else {
        if (r < 0.0) {
            k = -k;
            hk = -hk;
        }
        if (ar < 1.0) {
            const double as = 1.0 - r * r;
            double a = std::sqrt(as);
            const double bs = (h - k) * (h - k);
            const double asr = -(bs / as + hk) / 2.0;
            const double c = (4.0 - hk) / 8.0;
            const double d = (12.0 - hk) / 80.0;
            if (asr > -100.0)
                bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
            if (hk > -100.0) {
                const double b = std::sqrt(bs);
                const double sp = std::sqrt(tp) * normal_cdf(-b / a);
                bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a /= 2.0;
            double acc = 0.0;
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                const double xs = (a * nodes[i]) * (a * nodes[i]);
                const double e = -(bs / xs + hk) / 2.0;
                if (e <= -100.0) continue;
                const double rs = std::sqrt(1.0 - xs);
                const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                const double ep = std::exp(-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
                acc += weights[i] * std::exp(e) * (sp - ep);
            }
            bvn = (a * acc - bvn) / tp;
        }
        if (r > 0.0) {
            bvn += normal_sf(std::max(h, k));
        } else if (h >= k) {
            bvn = -bvn;
        } else {
            const double lo = h < 0.0 ? normal_cdf(k) - normal_cdf(h) : normal_sf(h) - normal_sf(k);
            bvn = lo - bvn;
        }
    }
    return std::clamp(bvn, 0.0, 1.0);
}

namespace {

double trivariate_upper(const Vec& a, const Mat& cov) {
    // standardize, then integrate the first coordinate against the exact
    // conditional bivariate tail of the other two
    Vec sd = cov.diagonal().cwiseSqrt();
    Vec h = a.cwiseQuotient(sd);
    Mat rho = cov.array() / (sd * sd.transpose()).array();
    const double r12 = rho(0, 1), r13 = rho(0, 2), r23 = rho(1, 2);
    const double s2 = std::sqrt(std::max(0.0, 1.0 - r12 * r12));
    const double s3 = std::sqrt(std::max(0.0, 1.0 - r13 * r13));
    if (s2 < 1e-12 || s3 < 1e-12) throw NumericalError("rect_cdf: degenerate trivariate covariance");
    const double rc = (r23 - r12 * r13) / (s2 * s3);

    auto integrand = [&](double t) {
        const double dens = std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
        if (dens == 0.0) return 0.0;
        return dens * bvn_upper((h[1] - r12 * t) / s2, (h[2] - r13 * t) / s3, std::clamp(rc, -1.0, 1.0));
    };
    const double lo = std::max(h[0], -40.0);
    const double hi = std::max(lo, 40.0);
    if (h[0] >= 40.0) return 0.0;
    double err = 0.0;
    const double val = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, lo, hi, 20,
                                                                                     1e-13, &err);
    if (err > 1e-10) throw NumericalError("rect_cdf: trivariate quadrature did not converge");
    return std::clamp(val, 0.0, 1.0);
}

}  // namespace

double rect_cdf(const Vec& lower, const Mat& cov) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
        if (std::isnan(lower[i])) throw NumericalError("rect_cdf: NaN limit");
        if (lower[i] == std::numeric_limits<double>::infinity()) return 0.0;
        if (lower[i] > -std::numeric_limits<double>::infinity()) keep.push_back(i);
    }
    const auto k = static_cast<Eigen::Index>(keep.size());
    if (k == 0) return 1.0;
    Vec a(k);
    Mat c(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        a[i] = lower[keep[static_cast<std::size_t>(i)]];
        for (Eigen::Index j = 0; j < k; ++j) c(i, j) = cov(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);
    }
    if ((c.diagonal().array() <= 0.0).any()) throw NumericalError("rect_cdf: non-positive variance");
    if (k == 1) return normal_sf(a[0] / std::sqrt(c(0, 0)));
    if (k == 2) {
        const double s0 = std::sqrt(c(0, 0)), s1 = std::sqrt(c(1, 1));
        return bvn_upper(a[0] / s0, a[1] / s1, std::clamp(c(0, 1) / (s0 * s1), -1.0, 1.0));
    }
    if (k == 3) return trivariate_upper(a, c);
    throw InputError("rect_cdf: " + std::to_string(k) + " finite limits exceed the supported dimension 3");
}

}  // namespace cpaem

#include "cpaem/oracle.hpp"

#include "cpaem/errors.hpp"
#include "cpaem/kernels.hpp"
#include "cpaem/lp.hpp"
#include "cpaem/parallel.hpp"
#include "cpaem/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace cpaem {

namespace {

constexpr std::uint32_t kStreamMarginal = 11;
constexpr std::uint32_t kStreamPosterior = 12;
constexpr std::uint32_t kStreamMass = 13;
constexpr std::uint32_t kStreamBootstrap = 14;
constexpr std::uint32_t kStreamEstep = 15;
constexpr std::size_t kBatch = 4096;
constexpr std::size_t kStatBlocks = 256;
constexpr int kBootstrap = 200;

struct FlatLayer {
    std::vector<double> w;  // row-major
    std::vector<double> b;
    std::size_t rows = 0, cols = 0;
    kernels::Act act = kernels::Act::Identity;
    double eta = 0.0;
};

std::vector<FlatLayer> flatten(const GenerativeNetwork& net) {
    if (net.hidden_units() > 64) throw InputError("oracles support at most 64 hidden units");
    std::vector<FlatLayer> out;
    for (const Layer& layer : net.layers()) {
        FlatLayer f;
        f.rows = static_cast<std::size_t>(layer.weight.rows());
        f.cols = static_cast<std::size_t>(layer.weight.cols());
        for (std::size_t r = 0; r < f.rows; ++r)
            for (std::size_t c = 0; c < f.cols; ++c)
                f.w.push_back(layer.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
        f.b.assign(layer.bias.data(), layer.bias.data() + layer.bias.size());
        f.act = static_cast<kernels::Act>(static_cast<int>(layer.activation.kind));
        f.eta = layer.activation.eta;
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<double> row_major(const Mat& m) {
    std::vector<double> out;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
    return out;
}

ActivationCode decode(std::uint64_t bits, const GenerativeNetwork& net) {
    ActivationCode code;
    int u = 0;
    for (int l = 1; l <= net.hidden_layers(); ++l) {
        std::vector<std::int8_t> q;
        for (int k = 0; k < net.width(l); ++k, ++u) q.push_back((bits >> u) & 1u ? 1 : -1);
        code.signs.push_back(std::move(q));
    }
    return code;
}

std::uint64_t encode(const ActivationCode& code) {
    std::uint64_t bits = 0;
    int u = 0;
    for (const auto& layer : code.signs)
        for (auto s : layer) {
            if (s > 0) bits |= std::uint64_t{1} << u;
            ++u;
        }
    return bits;
}

/// Prior samples [start, start + len): latent points, outputs and code bits,
/// all structure-of-arrays.
struct PriorBatch {
    std::size_t len = 0;
    std::vector<double> z, g;
    std::vector<std::uint64_t> codes;
};

class PriorSampler {
public:
    PriorSampler(const GenerativeNetwork& net, const Mat& sigma_z, std::uint64_t seed, std::uint32_t stream)
        : layers_(flatten(net)), chol_(SpdMatrix(sigma_z, "prior covariance").cholesky()), seed_(seed),
          stream_(stream), s_(static_cast<std::size_t>(net.latent_dim())) {}

    void fill(std::uint64_t start, std::size_t len, PriorBatch& out, bool want_output) const {
        const kernels::Table& k = kernels::active();
        out.len = len;
        out.z.assign(s_ * len, 0.0);
        out.codes.assign(len, 0);
        std::vector<double> eps(s_);
        for (std::size_t j = 0; j < len; ++j) {
            counter_normals(seed_, stream_, start + j, eps);
            for (std::size_t r = 0; r < s_; ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c <= r; ++c) acc += chol_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * eps[c];
                out.z[r * len + j] = acc;
            }
        }
        std::vector<double> in = out.z, h;
        int unit = 0;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const FlatLayer& f = layers_[l];
            const bool hidden = l + 1 < layers_.size();
            if (!hidden && !want_output) break;
            h.assign(f.rows * len, 0.0);
            k.dense_batch(f.w.data(), f.b.data(), f.rows, f.cols, in.data(), h.data(), len);
            if (hidden) {
                for (std::size_t r = 0; r < f.rows; ++r, ++unit) {
                    const double* hr = h.data() + r * len;
                    for (std::size_t j = 0; j < len; ++j)
                        if (hr[j] >= 0.0) out.codes[j] |= std::uint64_t{1} << unit;
                }
                k.activate_batch(f.act, f.eta, h.data(), h.size());
            }
            in.swap(h);
        }
        if (want_output) out.g = std::move(in);
    }

    std::size_t latent_dim() const noexcept { return s_; }

private:
    std::vector<FlatLayer> layers_;
    Mat chol_;
    std::uint64_t seed_;
    std::uint32_t stream_;
    std::size_t s_;
};

/// log phi(x; g_j, Sx) for every column of the batch.
void log_likelihoods(const Vec& x, const SpdMatrix& sigma_x, const std::vector<double>& lstar, const PriorBatch& b,
                     std::vector<double>& out) {
    const std::size_t d = static_cast<std::size_t>(x.size());
    std::vector<double> resid(d * b.len);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t j = 0; j < b.len; ++j) resid[r * b.len + j] = x[static_cast<Eigen::Index>(r)] - b.g[r * b.len + j];
    out.assign(b.len, 0.0);
    kernels::active().whitened_sqnorm_batch(lstar.data(), d, resid.data(), out.data(), b.len);
    const double c = -0.5 * (sigma_x.log_det() + static_cast<double>(d) * std::log(2.0 * std::numbers::pi));
    for (double& v : out) v = -0.5 * v + c;
}

struct Chunk {
    std::uint64_t start = 0;
    std::size_t len = 0;
};

std::vector<Chunk> chunks(std::uint64_t n, std::size_t blocks) {
    blocks = static_cast<std::size_t>(std::min<std::uint64_t>(blocks, n));
    std::vector<Chunk> out;
    const std::uint64_t base = n / blocks, extra = n % blocks;
    std::uint64_t at = 0;
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::uint64_t len = base + (b < extra ? 1 : 0);
        out.push_back(Chunk{at, static_cast<std::size_t>(len)});
        at += len;
    }
    return out;
}

// Weighted sums of one chunk, scaled by exp(-log_max).
struct WeightedStats {
    double log_max = -std::numeric_limits<double>::infinity();
    double sw = 0.0, sw2 = 0.0;
    Vec swz;
    Mat swzz;
    double swf = 0.0, swff = 0.0;
    std::map<std::uint64_t, double> code_w;

    void rescale(double new_max) {
        if (log_max == new_max) return;
        const double f = std::exp(log_max - new_max);
        sw *= f;
        sw2 *= f * f;
        swz *= f;
        swzz *= f;
        swf *= f;
        swff *= f;
        for (auto& [k, v] : code_w) v *= f;
        log_max = new_max;
    }
};

// Every chunk is evaluated with the same sampler, so the outcome does not
// depend on how chunks are spread over workers.
std::vector<WeightedStats> weighted_chunks(const Vec& x, const GenerativeNetwork& net, const NoiseModel& noise,
                                           std::uint64_t n, std::uint64_t seed, std::uint32_t stream,
                                           bool with_complete_ll) {
    if (x.size() != net.output_dim()) throw InputError("observation has the wrong dimension");
    const PriorSampler sampler(net, noise.sigma_z().matrix(), seed, stream);
    const std::vector<double> lstar = row_major(noise.sigma_x().inverse_cholesky());
    const std::vector<double> lz = row_major(noise.sigma_z().inverse_cholesky());
    const std::size_t s = sampler.latent_dim();
    const double cz = -0.5 * (noise.sigma_z().log_det() + static_cast<double>(s) * std::log(2.0 * std::numbers::pi));
    const auto parts = chunks(n, kStatBlocks);
    std::vector<WeightedStats> stats(parts.size());
    parallel_for(parts.size(), [&](std::size_t ci) {
        const Chunk& ch = parts[ci];
        std::vector<double> ll, lp;
        std::vector<PriorBatch> batches;
        // first pass: the chunk maximum
        double m = -std::numeric_limits<double>::infinity();
        std::vector<std::vector<double>> lls;
        for (std::size_t off = 0; off < ch.len; off += kBatch) {
            PriorBatch b;
            sampler.fill(ch.start + off, std::min(kBatch, ch.len - off), b, true);
            log_likelihoods(x, noise.sigma_x(), lstar, b, ll);
            for (double v : ll) m = std::max(m, v);
            lls.push_back(ll);
            batches.push_back(std::move(b));
        }
        WeightedStats& st = stats[ci];
        st.log_max = m;
        st.swz = Vec::Zero(static_cast<Eigen::Index>(s));
        st.swzz = Mat::Zero(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s));
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const PriorBatch& b = batches[bi];
            if (with_complete_ll) {
                lp.assign(b.len, 0.0);
                kernels::active().whitened_sqnorm_batch(lz.data(), s, b.z.data(), lp.data(), b.len);
            }
            for (std::size_t j = 0; j < b.len; ++j) {
                const double w = std::exp(lls[bi][j] - m);
                st.sw += w;
                st.sw2 += w * w;
                Vec z(static_cast<Eigen::Index>(s));
                for (std::size_t r = 0; r < s; ++r) z[static_cast<Eigen::Index>(r)] = b.z[r * b.len + j];
                st.swz += w * z;
                st.swzz += w * z * z.transpose();
                st.code_w[b.codes[j]] += w;
                if (with_complete_ll) {
                    const double f = lls[bi][j] + cz - 0.5 * lp[j];
                    st.swf += w * f;
                    st.swff += w * f * f;
                }
            }
        }
    });
    return stats;
}

WeightedStats merge(const std::vector<WeightedStats>& stats, const std::vector<std::size_t>& pick) {
    double m = -std::numeric_limits<double>::infinity();
    for (auto i : pick) m = std::max(m, stats[i].log_max);
    WeightedStats out;
    out.log_max = m;
    out.swz = Vec::Zero(stats.front().swz.size());
    out.swzz = Mat::Zero(stats.front().swzz.rows(), stats.front().swzz.cols());
    for (auto i : pick) {
        WeightedStats s = stats[i];
        s.rescale(m);
        out.sw += s.sw;
        out.sw2 += s.sw2;
        out.swz += s.swz;
        out.swzz += s.swzz;
        out.swf += s.swf;
        out.swff += s.swff;
        for (const auto& [k, v] : s.code_w) out.code_w[k] += v;
    }
    return out;
}

}  // namespace

OracleEstimate mc_marginal(const Vec& x, const GenerativeNetwork& net, const NoiseModel& noise, std::uint64_t n,
                           std::uint64_t seed) {
    if (n < 2) throw InputError("mc_marginal needs at least 2 samples");
    const auto stats = weighted_chunks(x, net, noise, n, seed, kStreamMarginal, false);
    std::vector<std::size_t> all(stats.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const WeightedStats t = merge(stats, all);
    const double nn = static_cast<double>(n);
    const double mean = t.sw / nn;
    const double var = std::max(0.0, (t.sw2 / nn - mean * mean) * nn / (nn - 1.0));
    OracleEstimate e;
    const double scale = std::exp(t.log_max);
    e.value = Mat::Constant(1, 1, mean * scale);
    e.stderr_ = Mat::Constant(1, 1, std::sqrt(var / nn) * scale);
    e.n_samples = n;
    e.seed = seed;
    return e;
}

IsPosteriorEstimate is_posterior_moments(const Vec& x, const GenerativeNetwork& net, const NoiseModel& noise,
                                         std::uint64_t n, std::uint64_t seed) {
    if (n < 2) throw InputError("is_posterior_moments needs at least 2 samples");
    const auto stats = weighted_chunks(x, net, noise, n, seed, kStreamPosterior, false);
    const std::size_t nb = stats.size();
    std::vector<std::size_t> all(nb);
    for (std::size_t i = 0; i < nb; ++i) all[i] = i;

    struct Point {
        Vec e1;
        Mat e2;
        std::map<std::uint64_t, double> share;
    };
    auto evaluate = [](const WeightedStats& t) {
        Point p{t.swz / t.sw, t.swzz / t.sw, {}};
        for (const auto& [k, v] : t.code_w) p.share[k] = v / t.sw;
        return p;
    };
    const WeightedStats total = merge(stats, all);
    if (!(total.sw > 0.0)) throw NumericalError("importance weights are all zero");
    const Point centre = evaluate(total);

    std::vector<Point> boots(kBootstrap);
    parallel_for(kBootstrap, [&](std::size_t r) {
        std::vector<double> u(nb);
        counter_uniforms(seed, kStreamBootstrap, r, u);
        std::vector<std::size_t> pick(nb);
        for (std::size_t j = 0; j < nb; ++j)
            pick[j] = std::min(nb - 1, static_cast<std::size_t>(u[j] * static_cast<double>(nb)));
        boots[r] = evaluate(merge(stats, pick));
    });

    const auto s = centre.e1.size();
    Vec v1 = Vec::Zero(s);
    Mat v2 = Mat::Zero(s, s);
    std::map<std::uint64_t, double> vshare;
    Vec m1 = Vec::Zero(s);
    Mat m2 = Mat::Zero(s, s);
    std::map<std::uint64_t, double> mshare;
    for (const Point& p : boots) {
        m1 += p.e1;
        m2 += p.e2;
        for (const auto& [k, v] : centre.share) mshare[k] += p.share.contains(k) ? p.share.at(k) : 0.0;
    }
    m1 /= kBootstrap;
    m2 /= kBootstrap;
    for (auto& [k, v] : mshare) v /= kBootstrap;
    for (const Point& p : boots) {
        v1 += (p.e1 - m1).cwiseAbs2();
        v2 += (p.e2 - m2).cwiseAbs2();
        for (const auto& [k, v] : centre.share) {
            const double d = (p.share.contains(k) ? p.share.at(k) : 0.0) - mshare[k];
            vshare[k] += d * d;
        }
    }
    const double denom = kBootstrap - 1;

    IsPosteriorEstimate out;
    out.e1 = OracleEstimate{centre.e1, (v1 / denom).cwiseSqrt(), n, seed, {}};
    out.e2 = OracleEstimate{centre.e2, (v2 / denom).cwiseSqrt(), n, seed, {}};
    for (const auto& [k, v] : centre.share)
        out.share[decode(k, net)] =
            OracleEstimate{Mat::Constant(1, 1, v), Mat::Constant(1, 1, std::sqrt(vshare[k] / denom)), n, seed, {}};
    out.ess = total.sw * total.sw / total.sw2;
    out.low_ess = out.ess < 50.0;
    if (out.low_ess) {
        out.e1.note = out.e2.note = "low effective sample size";
    }
    return out;
}

OracleEstimate is_expected_complete_ll(const Vec& x, const GenerativeNetwork& net, const NoiseModel& noise,
                                       std::uint64_t n, std::uint64_t seed) {
    if (n < 2) throw InputError("is_expected_complete_ll needs at least 2 samples");
    const auto stats = weighted_chunks(x, net, noise, n, seed, kStreamEstep, true);
    std::vector<std::size_t> all(stats.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const WeightedStats t = merge(stats, all);
    const double mean = t.swf / t.sw;
    // delta method for the ratio sum(w f) / sum(w), with the iid chunks as units
    double var = 0.0;
    for (const WeightedStats& s0 : stats) {
        WeightedStats s = s0;
        s.rescale(t.log_max);
        const double d = s.swf - mean * s.sw;
        var += d * d;
    }
    OracleEstimate e;
    e.value = Mat::Constant(1, 1, mean);
    e.stderr_ = Mat::Constant(1, 1, std::sqrt(var) / t.sw);
    e.n_samples = n;
    e.seed = seed;
    return e;
}

QuadMoments quad_region_moments(const PolytopeH& region, const Vec& mean, const Mat& cov, std::size_t grid) {
    const int s = region.dim();
    if (s < 1 || s > 2) throw InputError("quadrature oracle supports latent dimension 1 or 2");
    if (grid < 8) throw InputError("quadrature grid too coarse");
    const SpdMatrix spd(cov, "quadrature covariance");
    const Vec sd = cov.diagonal().cwiseSqrt();

    // integration window: region bounding box within mean +/- 12 sd
    PolytopeH win = region;
    {
        const Eigen::Index f = region.faces();
        win.normals.conservativeResize(f + 2 * s, s);
        win.offsets.conservativeResize(f + 2 * s);
        for (int i = 0; i < s; ++i) {
            win.normals.row(f + 2 * i).setZero();
            win.normals(f + 2 * i, i) = 1.0;
            win.offsets[f + 2 * i] = mean[i] + 12.0 * sd[i];
            win.normals.row(f + 2 * i + 1).setZero();
            win.normals(f + 2 * i + 1, i) = -1.0;
            win.offsets[f + 2 * i + 1] = -(mean[i] - 12.0 * sd[i]);
        }
    }
    Vec lo(s), hi(s);
    for (int i = 0; i < s; ++i) {
        Vec c = Vec::Zero(s);
        c[i] = 1.0;
        const LpResult up = lp_maximize(c, win.normals, win.offsets);
        const LpResult dn = lp_maximize(-c, win.normals, win.offsets);
        if (up.status != LpStatus::Optimal || dn.status != LpStatus::Optimal)
            throw InputError("region does not intersect the quadrature window");
        hi[i] = up.value;
        lo[i] = -dn.value;
    }
    const std::vector<double> normals = row_major(region.normals);
    const std::vector<double> offsets(region.offsets.data(), region.offsets.data() + region.offsets.size());
    const std::vector<double> lstar = row_major(spd.inverse_cholesky());
    const double logc = -0.5 * (spd.log_det() + s * std::log(2.0 * std::numbers::pi));

    // S = 1: masked midpoint rule over the exact interval
    auto integrate_line = [&](std::size_t cells) {
        const double h = (hi[0] - lo[0]) / static_cast<double>(cells);
        const kernels::Table& k = kernels::active();
        std::vector<double> pts(cells), resid(cells), q(cells);
        std::vector<std::uint8_t> mask(cells);
        for (std::size_t j = 0; j < cells; ++j) {
            pts[j] = lo[0] + (static_cast<double>(j) + 0.5) * h;
            resid[j] = pts[j] - mean[0];
        }
        k.halfspace_mask_batch(normals.data(), offsets.data(), offsets.size(), 1, pts.data(), 0.0, mask.data(), cells);
        k.whitened_sqnorm_batch(lstar.data(), 1, resid.data(), q.data(), cells);
        RegionMoments m{0.0, Vec::Zero(1), Mat::Zero(1, 1)};
        for (std::size_t j = 0; j < cells; ++j) {
            if (!mask[j]) continue;
            const double w = std::exp(logc - 0.5 * q[j]) * h;
            m.e0 += w;
            m.e1[0] += w * pts[j];
            m.e2(0, 0) += w * pts[j] * pts[j];
        }
        return m;
    };

    // S = 2: Simpson in z2; along each row the cross-section is an
    // interval and z1 | z2 is normal, so the inner integral is exact.
    // the row integral has kinks where a vertex sits; those z2 values split
    // the outer axis into smooth pieces
    std::vector<double> breaks{lo[1], hi[1]};
    if (s == 2) {
        const Eigen::Index f = region.faces();
        for (Eigen::Index i = 0; i < f; ++i)
            for (Eigen::Index j = i + 1; j < f; ++j) {
                const double det = region.normals(i, 0) * region.normals(j, 1) - region.normals(i, 1) * region.normals(j, 0);
                if (std::fabs(det) < 1e-12) continue;
                const double y = (region.normals(i, 0) * region.offsets[j] - region.normals(j, 0) * region.offsets[i]) / det;
                if (y > lo[1] && y < hi[1]) breaks.push_back(y);
            }
        for (Eigen::Index i = 0; i < f; ++i) {
            if (std::fabs(region.normals(i, 1)) < 1e-12) continue;
            for (const double x : {lo[0], hi[0]}) {
                const double y = (region.offsets[i] - region.normals(i, 0) * x) / region.normals(i, 1);
                if (y > lo[1] && y < hi[1]) breaks.push_back(y);
            }
        }
        std::sort(breaks.begin(), breaks.end());
        breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    }

    auto integrate_plane = [&](std::size_t cells) {
        // composite Simpson on each piece, cells shared out by piece length
        std::vector<double> nodes, widths;
        const double total = hi[1] - lo[1];
        for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
            const double len = breaks[b + 1] - breaks[b];
            auto n = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(static_cast<double>(cells) * len / total)));
            n += n % 2;
            const double hb = len / static_cast<double>(n);
            for (std::size_t i = 0; i <= n; ++i) {
                nodes.push_back(breaks[b] + static_cast<double>(i) * hb);
                widths.push_back(hb / 3.0 * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0)));
            }
        }
        const double v2 = cov(1, 1);
        const double slope = cov(0, 1) / v2;
        const double cs = std::sqrt(std::max(cov(0, 0) - cov(0, 1) * slope, 0.0));
        const Eigen::Index faces = region.faces();
        std::vector<RegionMoments> rows(nodes.size());
        parallel_for(nodes.size(), [&](std::size_t r) {
            const double z2 = nodes[r];
            const double h = widths[r];
            RegionMoments& m = rows[r];
            m = RegionMoments{0.0, Vec::Zero(2), Mat::Zero(2, 2)};
            double a = lo[0], b = hi[0];
            for (Eigen::Index f = 0; f < faces; ++f) {
                const double n1 = region.normals(f, 0);
                const double rest = region.offsets[f] - region.normals(f, 1) * z2;
                if (std::fabs(n1) < 1e-300) {
                    if (rest < 0.0) return;
                } else if (n1 > 0.0) {
                    b = std::min(b, rest / n1);
                } else {
                    a = std::max(a, rest / n1);
                }
            }
            if (!(b > a)) return;
            const double d2 = z2 - mean[1];
            const double w2 = std::exp(-0.5 * d2 * d2 / v2) / std::sqrt(2.0 * std::numbers::pi * v2) * h;
            const double cm = mean[0] + slope * d2;
            const double al = (a - cm) / cs, be = (b - cm) / cs;
            auto pdf = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); };
            double p;
            if (al > 0.0) p = 0.5 * (std::erfc(al / std::numbers::sqrt2) - std::erfc(be / std::numbers::sqrt2));
            else if (be < 0.0) p = 0.5 * (std::erfc(-be / std::numbers::sqrt2) - std::erfc(-al / std::numbers::sqrt2));
            else p = 1.0 - 0.5 * std::erfc(be / std::numbers::sqrt2) - 0.5 * std::erfc(-al / std::numbers::sqrt2);
            const double dphi = pdf(al) - pdf(be);
            const double u1 = cm * p + cs * dphi;
            const double u2 = (cm * cm + cs * cs) * p + 2.0 * cm * cs * dphi + cs * cs * (al * pdf(al) - be * pdf(be));
            m.e0 = w2 * p;
            m.e1 << w2 * u1, w2 * z2 * p;
            m.e2 << w2 * u2, w2 * z2 * u1, w2 * z2 * u1, w2 * z2 * z2 * p;
        });
        RegionMoments m{0.0, Vec::Zero(2), Mat::Zero(2, 2)};
        for (const RegionMoments& r : rows) {
            m.e0 += r.e0;
            m.e1 += r.e1;
            m.e2 += r.e2;
        }
        return m;
    };
    auto integrate = [&](std::size_t cells) { return s == 1 ? integrate_line(cells) : integrate_plane(cells); };

    QuadMoments out;
    out.grid = grid;
    out.value = integrate(grid);
    const RegionMoments coarse = integrate(grid / 2);
    out.error = std::max({std::fabs(out.value.e0 - coarse.e0), (out.value.e1 - coarse.e1).cwiseAbs().maxCoeff(),
                          (out.value.e2 - coarse.e2).cwiseAbs().maxCoeff()});
    return out;
}

std::map<ActivationCode, std::uint64_t> mc_code_counts(const GenerativeNetwork& net, const Mat& sigma_z,
                                                       std::uint64_t n, std::uint64_t seed) {
    const PriorSampler sampler(net, sigma_z, seed, kStreamMass);
    const auto parts = chunks(n, kStatBlocks);
    std::vector<std::map<std::uint64_t, std::uint64_t>> counts(parts.size());
    parallel_for(parts.size(), [&](std::size_t ci) {
        PriorBatch b;
        for (std::size_t off = 0; off < parts[ci].len; off += kBatch) {
            sampler.fill(parts[ci].start + off, std::min(kBatch, parts[ci].len - off), b, false);
            for (auto c : b.codes) ++counts[ci][c];
        }
    });
    std::map<std::uint64_t, std::uint64_t> total;
    for (const auto& m : counts)
        for (const auto& [k, v] : m) total[k] += v;
    std::map<ActivationCode, std::uint64_t> out;
    for (const auto& [k, v] : total) out[decode(k, net)] = v;
    return out;
}

OracleEstimate mc_region_mass(const GenerativeNetwork& net, const ActivationCode& code, const Mat& sigma_z,
                              std::uint64_t n, std::uint64_t seed) {
    if (n < 1) throw InputError("mc_region_mass needs at least one sample");
    const auto counts = mc_code_counts(net, sigma_z, n, seed);
    const std::uint64_t key = encode(code);
    std::uint64_t hits = 0;
    for (const auto& [c, v] : counts)
        if (encode(c) == key) hits = v;
    const double p = static_cast<double>(hits) / static_cast<double>(n);
    OracleEstimate e;
    e.value = Mat::Constant(1, 1, p);
    e.stderr_ = Mat::Constant(1, 1, std::sqrt(p * (1.0 - p) / static_cast<double>(n)));
    e.n_samples = n;
    e.seed = seed;
    return e;
}

}  // namespace cpaem

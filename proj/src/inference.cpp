#include "cpaem/inference.hpp"

#include "cpaem/errors.hpp"
#include "cpaem/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cpaem {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kDropRatio = 1e-14;
}  // namespace

double log_sum_exp(const std::vector<double>& v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

RegionPosterior region_posterior_params(const Vec& x, const AffineMap& affine, const NoiseModel& noise) {
    const Mat& a = affine.slope;
    const Mat& px = noise.sigma_x().inverse();
    const Mat prec = noise.sigma_z().inverse() + a.transpose() * px * a;
    const SpdMatrix prec_spd(0.5 * (prec + prec.transpose()), "posterior precision");
    RegionPosterior r{Vec(), SpdMatrix(prec_spd.inverse(), "posterior covariance"), 0.0};
    r.mu = r.sigma.matrix() * (a.transpose() * (px * (x - affine.offset)));
    const Mat ev = noise.sigma_x().matrix() + a * noise.sigma_z().matrix() * a.transpose();
    r.log_kappa = mvn_logpdf(x, affine.offset, SpdMatrix(0.5 * (ev + ev.transpose()), "evidence covariance"));
    return r;
}

ExactPosterior::ExactPosterior(const Partition& partition, const NoiseModel& noise)
    : partition_(partition), noise_(noise) {
    if (partition.regions.empty()) throw InputError("exact inference needs a non-empty partition");
    const Mat& px = noise.sigma_x().inverse();
    for (const Region& r : partition.regions) {
        const Mat& a = r.affine.slope;
        if (a.rows() != noise.sigma_x().dim() || a.cols() != noise.sigma_z().dim())
            throw InputError("noise model does not match the network dimensions");
        Mat prec = noise.sigma_z().inverse() + a.transpose() * px * a;
        prec = 0.5 * (prec + prec.transpose());
        const SpdMatrix prec_spd(prec, "posterior precision");
        Cached c{SpdMatrix(prec_spd.inverse(), "posterior covariance"), Mat(), SpdMatrix()};
        c.gain = c.sigma.matrix() * a.transpose() * px;
        Mat ev = noise.sigma_x().matrix() + a * noise.sigma_z().matrix() * a.transpose();
        c.evidence = SpdMatrix(0.5 * (ev + ev.transpose()), "evidence covariance");
        cache_.push_back(std::move(c));
    }
}

RegionPosterior ExactPosterior::region_params(const Vec& x, int region) const {
    const Region& r = partition_.regions[static_cast<std::size_t>(region)];
    const Cached& c = cache_[static_cast<std::size_t>(region)];
    return RegionPosterior{c.gain * (x - r.affine.offset), c.sigma, mvn_logpdf(x, r.affine.offset, c.evidence)};
}

ExactPosterior::Piece ExactPosterior::region_piece(const Vec& x, int region, bool need_moments) const {
    const Region& r = partition_.regions[static_cast<std::size_t>(region)];
    const Cached& c = cache_[static_cast<std::size_t>(region)];
    Piece p;
    p.mu = c.gain * (x - r.affine.offset);
    const double log_kappa = mvn_logpdf(x, r.affine.offset, c.evidence);
    if (need_moments) {
        p.centred = region_moments(r.cones, p.mu, c.sigma.matrix());
    } else {
        p.centred.e0 = region_mass(r.cones, p.mu, c.sigma.matrix());
    }
    p.log_mass = p.centred.e0 > 0.0 ? log_kappa + std::log(p.centred.e0) : kNegInf;
    return p;
}

double ExactPosterior::log_marginal(const Vec& x) const {
    if (x.size() != noise_.sigma_x().dim()) throw InputError("observation has the wrong dimension");
    std::vector<double> terms;
    for (int i = 0; i < static_cast<int>(partition_.size()); ++i) terms.push_back(region_piece(x, i, false).log_mass);
    const double lm = log_sum_exp(terms);
    if (lm == kNegInf) throw NumericalError("every region has zero mass for this observation");
    return lm;
}

PosteriorSummary ExactPosterior::moments(const Vec& x) const {
    if (x.size() != noise_.sigma_x().dim()) throw InputError("observation has the wrong dimension");
    const int n = static_cast<int>(partition_.size());
    std::vector<Piece> pieces;
    std::vector<double> terms;
    for (int i = 0; i < n; ++i) {
        pieces.push_back(region_piece(x, i, true));
        terms.push_back(pieces.back().log_mass);
    }
    PosteriorSummary s;
    s.log_marginal = log_sum_exp(terms);
    if (s.log_marginal == kNegInf) throw NumericalError("every region has zero mass for this observation");
    const double max_term = *std::max_element(terms.begin(), terms.end());
    const auto sdim = noise_.sigma_z().dim();
    s.total_e1 = Vec::Zero(sdim);
    s.total_e2 = Mat::Zero(sdim, sdim);
    for (int i = 0; i < n; ++i) {
        const Piece& p = pieces[static_cast<std::size_t>(i)];
        if (p.log_mass == kNegInf || p.log_mass - max_term < std::log(kDropRatio)) continue;
        const double scale = std::exp(p.log_mass - s.log_marginal) / p.centred.e0;
        const RegionMoments& c = p.centred;
        RegionTerm t;
        t.region = i;
        t.weight = scale * c.e0;
        t.e1 = scale * (c.e1 + c.e0 * p.mu);
        t.e2 = scale * (c.e2 + c.e1 * p.mu.transpose() + p.mu * c.e1.transpose() + c.e0 * p.mu * p.mu.transpose());
        t.e2 = 0.5 * (t.e2 + t.e2.transpose());
        s.total_e1 += t.e1;
        s.total_e2 += t.e2;
        s.per_region.push_back(std::move(t));
    }
    return s;
}

double ExactPosterior::log_density(const Vec& z, const Vec& x, const GenerativeNetwork& net) const {
    if (z.size() != noise_.sigma_z().dim()) throw InputError("latent point has the wrong dimension");
    if (z.cwiseAbs().maxCoeff() > partition_.bounding_radius) return kNegInf;
    const int idx = partition_.find(activation_code(net, z));
    if (idx < 0) return kNegInf;
    const RegionPosterior rp = region_params(x, idx);
    return rp.log_kappa + mvn_logpdf(z, rp.mu, rp.sigma) - log_marginal(x);
}

Vec ExactPosterior::map_latent(const Vec& x) const {
    const Mat& px = noise_.sigma_x().inverse();
    const Mat& pz = noise_.sigma_z().inverse();
    auto objective = [&](const Region& r, const Vec& z) {
        const Vec res = x - r.affine.apply(z);
        return -0.5 * res.dot(px * res) - 0.5 * z.dot(pz * z);
    };
    double best = kNegInf;
    Vec best_z;
    for (int i = 0; i < static_cast<int>(partition_.size()); ++i) {
        const Region& r = partition_.regions[static_cast<std::size_t>(i)];
        const Cached& c = cache_[static_cast<std::size_t>(i)];
        const Vec mu = c.gain * (x - r.affine.offset);
        const Mat& sig = c.sigma.matrix();
        const int s = static_cast<int>(mu.size());
        const int f = r.hrep.faces();
        double region_best = kNegInf;
        Vec region_z;
        auto consider = [&](const Vec& z) {
            if (!r.hrep.contains(z, 1e-9)) return;
            const double v = objective(r, z);
            if (v > region_best) {
                region_best = v;
                region_z = z;
            }
        };
        consider(mu);
        // equality-constrained minimizers for every active set of size 1..S
        std::vector<int> idx;
        auto recurse = [&](auto&& self, int start) -> void {
            if (!idx.empty()) {
                const auto k = static_cast<Eigen::Index>(idx.size());
                Mat n(k, s);
                Vec cvec(k);
                for (Eigen::Index j = 0; j < k; ++j) {
                    n.row(j) = r.hrep.normals.row(idx[static_cast<std::size_t>(j)]);
                    cvec[j] = r.hrep.offsets[idx[static_cast<std::size_t>(j)]];
                }
                const Mat gram = n * sig * n.transpose();
                Eigen::FullPivLU<Mat> lu(gram);
                if (lu.isInvertible()) {
                    const Vec lambda = lu.solve(n * mu - cvec);
                    consider(mu - sig * n.transpose() * lambda);
                }
            }
            if (static_cast<int>(idx.size()) == s) return;
            for (int j = start; j < f; ++j) {
                idx.push_back(j);
                self(self, j + 1);
                idx.pop_back();
            }
        };
        recurse(recurse, 0);
        if (region_z.size() == 0) continue;
        if (best_z.size() == 0 || region_best > best + 1e-12 * (1.0 + std::fabs(best))) {
            best = region_best;
            best_z = region_z;
        }
    }
    if (best_z.size() == 0) throw NumericalError("map_latent: no feasible candidate found");
    return best_z;
}

double log_marginal(const Vec& x, const Partition& partition, const NoiseModel& noise) {
    return ExactPosterior(partition, noise).log_marginal(x);
}

PosteriorSummary posterior_moments(const Vec& x, const Partition& partition, const NoiseModel& noise) {
    return ExactPosterior(partition, noise).moments(x);
}

double posterior_logdensity(const Vec& z, const Vec& x, const GenerativeNetwork& net,
                            const Partition& partition, const NoiseModel& noise) {
    return ExactPosterior(partition, noise).log_density(z, x, net);
}

Vec map_latent(const Vec& x, const Partition& partition, const NoiseModel& noise) {
    return ExactPosterior(partition, noise).map_latent(x);
}

double dataset_nll(const std::vector<Vec>& data, const Partition& partition, const NoiseModel& noise) {
    if (data.empty()) throw InputError("dataset is empty");
    const ExactPosterior post(partition, noise);
    std::vector<double> lm(data.size());
    parallel_for(data.size(), [&](std::size_t i) { lm[i] = post.log_marginal(data[i]); });
    double nll = 0.0;
    for (double v : lm) nll -= v;
    return nll;
}

double prior_tail_mass(const Partition& partition, const NoiseModel& noise) {
    const Vec zero = Vec::Zero(noise.sigma_z().dim());
    double mass = 0.0;
    for (const Region& r : partition.regions) mass += region_mass(r.cones, zero, noise.sigma_z().matrix());
    return std::max(0.0, 1.0 - mass);
}

}  // namespace cpaem

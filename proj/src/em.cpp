#include "cpaem/em.hpp"

#include "cpaem/errors.hpp"
#include "cpaem/parallel.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>

namespace cpaem {

namespace {

void hash_bytes(std::uint64_t& h, const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) h = (h ^ b[i]) * 1099511628211ull;
}

void hash_matrix(std::uint64_t& h, const Mat& m) {
    const Eigen::Index dims[2] = {m.rows(), m.cols()};
    hash_bytes(h, dims, sizeof dims);
    hash_bytes(h, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

double resolve_radius(double r, const NoiseModel& noise) {
    return r > 0.0 ? r : default_bounding_radius(noise.sigma_z().matrix());
}

// Per-region quantities for updating layer l with the codes held fixed.
struct LayerView {
    Mat a;       // A_w
    Vec b;       // b_w
    Mat bmat;    // A^{l+1->L} D^l
    Mat in_a;    // layer input slope
    Vec in_b;    // layer input offset
};

LayerView layer_view(const GenerativeNetwork& net, const ActivationCode& code, int l) {
    LayerView v;
    const AffineMap aff = per_region_affine(net, code);
    v.a = aff.slope;
    v.b = aff.offset;
    v.bmat = backprop_affine(net, code, l) * activation_diagonal(net, code, l).asDiagonal();
    auto [ia, ib] = layer_input_affine(net, code, l);
    v.in_a = std::move(ia);
    v.in_b = std::move(ib);
    return v;
}

std::vector<LayerView> layer_views(const GenerativeNetwork& net, const Partition& part, int l) {
    std::vector<LayerView> out(part.size());
    parallel_for(part.size(), [&](std::size_t i) { out[i] = layer_view(net, part.regions[i].code, l); });
    return out;
}

// Directions the frozen objective does not see (e.g. a unit inactive on all
// posterior mass) stay at their current values.
Vec ridge_solve(Mat gram, const Vec& rhs, const Vec& current, double ridge, const char* what) {
    const Eigen::Index n = gram.rows();
    gram = 0.5 * (gram + gram.transpose());
    const double scale = gram.trace() / static_cast<double>(n);
    const double lambda = ridge * (scale > 0.0 ? scale : 1.0);
    gram.diagonal().array() += lambda;
    Eigen::LDLT<Mat> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw NumericalError(std::string(what) + ": singular normal equations");
    Vec sol = ldlt.solve(rhs + lambda * current);
    if (!sol.allFinite()) throw NumericalError(std::string(what) + ": non-finite solution");
    return sol;
}

void check_cache(const std::vector<Vec>& data, const EStepCache& cache) {
    if (!cache.partition) throw ContractViolation("E-step cache has no partition");
    if (cache.size() != data.size()) throw ContractViolation("E-step cache does not match the dataset size");
}

}  // namespace

std::uint64_t parameter_fingerprint(const GenerativeNetwork& net, const NoiseModel& noise, double radius) {
    std::uint64_t h = 1469598103934665603ull;
    for (const Layer& layer : net.layers()) {
        hash_matrix(h, layer.weight);
        hash_matrix(h, layer.bias);
        const int kind = static_cast<int>(layer.activation.kind);
        hash_bytes(h, &kind, sizeof kind);
        hash_bytes(h, &layer.activation.eta, sizeof(double));
    }
    hash_matrix(h, noise.sigma_x().matrix());
    hash_matrix(h, noise.sigma_z().matrix());
    hash_bytes(h, &radius, sizeof radius);
    return h;
}

EStepCache e_step(const std::vector<Vec>& data, const GenerativeNetwork& net, const NoiseModel& noise,
                  const EStepOptions& options) {
    if (data.empty()) throw InputError("E-step needs a non-empty dataset");
    const double radius = resolve_radius(options.bounding_radius, noise);
    PartitionOptions popt;
    popt.bounding_radius = radius;
    popt.max_regions = options.max_regions;
    EStepCache cache;
    cache.partition = std::make_shared<const Partition>(
        enumerate_partition(net, Vec::Zero(net.latent_dim()), popt));
    const ExactPosterior post(*cache.partition, noise);
    cache.summaries.resize(data.size());
    parallel_for(data.size(), [&](std::size_t i) { cache.summaries[i] = post.moments(data[i]); });
    cache.nll = 0.0;
    for (const auto& s : cache.summaries) cache.nll -= s.log_marginal;
    cache.fingerprint = parameter_fingerprint(net, noise, radius);
    return cache;
}

double expected_complete_ll(const Vec& x, const PosteriorSummary& summary, const GenerativeNetwork& net,
                            const Partition& partition, const NoiseModel& noise) {
    const Mat& px = noise.sigma_x().inverse();
    const double dim = static_cast<double>(noise.sigma_x().dim() + noise.sigma_z().dim());
    double q = -0.5 * (dim * std::log(2.0 * std::numbers::pi) + noise.sigma_x().log_det() + noise.sigma_z().log_det());
    q -= 0.5 * (noise.sigma_z().inverse().cwiseProduct(summary.total_e2)).sum();
    double quad = x.dot(px * x);
    for (const RegionTerm& t : summary.per_region) {
        const AffineMap aff = per_region_affine(net, partition.regions[static_cast<std::size_t>(t.region)].code);
        const Mat& a = aff.slope;
        const Vec& b = aff.offset;
        quad -= 2.0 * x.dot(px * (a * t.e1 + b * t.weight));
        quad += (a.transpose() * px * a).cwiseProduct(t.e2).sum();
        quad += (t.weight * b + 2.0 * a * t.e1).dot(px * b);
    }
    return q - 0.5 * quad;
}

double frozen_objective(const std::vector<Vec>& data, const EStepCache& cache, const GenerativeNetwork& net,
                        const NoiseModel& noise) {
    check_cache(data, cache);
    std::vector<double> v(data.size());
    parallel_for(data.size(), [&](std::size_t i) {
        v[i] = expected_complete_ll(data[i], cache.summaries[i], net, *cache.partition, noise);
    });
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum;
}

double expected_complete_ll(const std::vector<Vec>& data, const EStepCache& cache, const GenerativeNetwork& net,
                            const NoiseModel& noise) {
    if (parameter_fingerprint(net, noise, cache.partition ? cache.partition->bounding_radius : 0.0) !=
        cache.fingerprint)
        throw ContractViolation("stale E-step cache: parameters changed since it was computed");
    return frozen_objective(data, cache, net, noise);
}

Vec m_step_bias(int l, const std::vector<Vec>& data, const EStepCache& cache, const GenerativeNetwork& net,
                const NoiseModel& noise, double ridge) {
    check_cache(data, cache);
    if (l < 1 || l > net.depth()) throw InputError("m_step_bias: layer out of range");
    const auto views = layer_views(net, *cache.partition, l);
    const Mat& px = noise.sigma_x().inverse();
    const Vec& v_old = net.layer(l).bias;
    const Eigen::Index w = v_old.size();
    Mat gram = Mat::Zero(w, w);
    Vec rhs = Vec::Zero(w);
    for (std::size_t n = 0; n < data.size(); ++n) {
        for (const RegionTerm& t : cache.summaries[n].per_region) {
            const LayerView& v = views[static_cast<std::size_t>(t.region)];
            const Mat bp = v.bmat.transpose() * px;
            gram += t.weight * bp * v.bmat;
            const Vec other = v.b - v.bmat * v_old;
            rhs += bp * (data[n] * t.weight - v.a * t.e1 - other * t.weight);
        }
    }
    return ridge_solve(gram, rhs, v_old, ridge, "bias update");
}

Mat m_step_weight(int l, const std::vector<Vec>& data, const EStepCache& cache, const GenerativeNetwork& net,
                  const NoiseModel& noise, double ridge) {
    check_cache(data, cache);
    if (l < 1 || l > net.depth()) throw InputError("m_step_weight: layer out of range");
    const auto views = layer_views(net, *cache.partition, l);
    const Mat& px = noise.sigma_x().inverse();
    const Mat& w_old = net.layer(l).weight;
    const Eigen::Index rows = w_old.rows(), cols = w_old.cols();
    Mat gram = Mat::Zero(rows * cols, rows * cols);
    Mat rhs = Mat::Zero(rows, cols);
    for (std::size_t n = 0; n < data.size(); ++n) {
        for (const RegionTerm& t : cache.summaries[n].per_region) {
            const LayerView& v = views[static_cast<std::size_t>(t.region)];
            const Mat bp = v.bmat.transpose() * px;
            const Mat u = bp * v.bmat;
            const Vec zhat = v.in_a * t.e1 + v.in_b * t.weight;
            Mat vv = v.in_a * t.e2 * v.in_a.transpose() + v.in_a * t.e1 * v.in_b.transpose() +
                     v.in_b * t.e1.transpose() * v.in_a.transpose() + t.weight * v.in_b * v.in_b.transpose();
            vv = 0.5 * (vv + vv.transpose());
            // vec(U W V) = (V^T kron U) vec(W), column-major
            for (Eigen::Index j = 0; j < cols; ++j)
                for (Eigen::Index i = 0; i < cols; ++i)
                    gram.block(j * rows, i * rows, rows, rows) += vv(i, j) * u;
            const Vec c_rest = v.b - v.bmat * w_old * v.in_b;
            rhs += bp * (data[n] - c_rest) * zhat.transpose();
        }
    }
    const Vec sol = ridge_solve(gram, Eigen::Map<const Vec>(rhs.data(), rhs.size()),
                                Eigen::Map<const Vec>(w_old.data(), w_old.size()), ridge, "weight update");
    return Eigen::Map<const Mat>(sol.data(), rows, cols);
}

Mat m_step_sigma_x(const std::vector<Vec>& data, const EStepCache& cache, const GenerativeNetwork& net,
                   CovarianceForm form) {
    check_cache(data, cache);
    const Eigen::Index d = net.output_dim();
    Mat m = Mat::Zero(d, d);
    for (std::size_t n = 0; n < data.size(); ++n) {
        const Vec& x = data[n];
        for (const RegionTerm& t : cache.summaries[n].per_region) {
            const AffineMap aff = per_region_affine(net, cache.partition->regions[static_cast<std::size_t>(t.region)].code);
            const Mat& a = aff.slope;
            const Vec& b = aff.offset;
            const Vec mean = a * t.e1 + b * t.weight;
            m += t.weight * x * x.transpose() - x * mean.transpose() - mean * x.transpose() +
                 a * t.e2 * a.transpose() + a * t.e1 * b.transpose() + b * t.e1.transpose() * a.transpose() +
                 t.weight * b * b.transpose();
        }
    }
    m /= static_cast<double>(data.size());
    m = 0.5 * (m + m.transpose());
    if (form == CovarianceForm::Isotropic) {
        m = Mat::Identity(d, d) * (m.trace() / static_cast<double>(d));
    } else if (form == CovarianceForm::Diagonal) {
        m = Mat(m.diagonal().asDiagonal());
    }
    eigen_floor(m, 1e-10);
    return m;
}

Mat m_step_sigma_z(const EStepCache& cache) {
    if (cache.summaries.empty()) throw ContractViolation("E-step cache is empty");
    Mat m = Mat::Zero(cache.summaries.front().total_e2.rows(), cache.summaries.front().total_e2.cols());
    for (const auto& s : cache.summaries) m += s.total_e2;
    m /= static_cast<double>(cache.size());
    eigen_floor(m, 1e-10);
    return m;
}

void parse_update_flags(const std::string& list, EmConfig& config) {
    config.update_sigma_x = config.update_sigma_z = config.update_biases = config.update_weights = false;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "sigma_x") config.update_sigma_x = true;
        else if (item == "sigma_z") config.update_sigma_z = true;
        else if (item == "biases") config.update_biases = true;
        else if (item == "weights") config.update_weights = true;
        else if (item == "none" || item.empty()) continue;
        else throw InputError("unknown update '" + item + "' (expected sigma_x, sigma_z, biases, weights)");
    }
}

namespace {

struct Params {
    GenerativeNetwork net;
    NoiseModel noise;
};

// One parameter group: target computes the full M-step, blend forms
// theta + t (target - theta).
struct Group {
    std::string name;
    std::function<Params(const Params&, const EStepCache&)> target;
    std::function<Params(const Params&, const Params&, double)> blend;
};

}  // namespace

EmResult em_fit(const std::vector<Vec>& data, const GenerativeNetwork& net, const NoiseModel& noise,
                const EmConfig& config) {
    using clock = std::chrono::steady_clock;
    if (data.empty()) throw InputError("EM needs a non-empty dataset");
    if (config.max_iters < 0) throw InputError("max_iters must be non-negative");
    const double radius = resolve_radius(config.bounding_radius, noise);
    EStepOptions eopt{radius, config.max_regions};

    std::vector<Group> groups;
    if (config.update_biases) {
        for (int l = net.depth(); l >= 1; --l) {
            groups.push_back(Group{
                fmt::format("bias {}", l),
                [&data, l, &config](const Params& p, const EStepCache& c) {
                    return Params{p.net.with_bias(l, m_step_bias(l, data, c, p.net, p.noise, config.ridge)), p.noise};
                },
                [l](const Params& a, const Params& b, double t) {
                    const Vec& va = a.net.layer(l).bias;
                    return Params{a.net.with_bias(l, va + t * (b.net.layer(l).bias - va)), a.noise};
                }});
        }
    }
    if (config.update_weights) {
        for (int l = net.depth(); l >= 1; --l) {
            groups.push_back(Group{
                fmt::format("weight {}", l),
                [&data, l, &config](const Params& p, const EStepCache& c) {
                    return Params{p.net.with_weight(l, m_step_weight(l, data, c, p.net, p.noise, config.ridge)),
                                  p.noise};
                },
                [l](const Params& a, const Params& b, double t) {
                    const Mat& wa = a.net.layer(l).weight;
                    return Params{a.net.with_weight(l, wa + t * (b.net.layer(l).weight - wa)), a.noise};
                }});
        }
    }
    if (config.update_sigma_x) {
        groups.push_back(Group{
            "sigma_x",
            [&data, &config](const Params& p, const EStepCache& c) {
                return Params{p.net, NoiseModel(m_step_sigma_x(data, c, p.net, config.sigma_x_form),
                                                p.noise.sigma_z().matrix())};
            },
            [](const Params& a, const Params& b, double t) {
                const Mat& sa = a.noise.sigma_x().matrix();
                return Params{a.net, NoiseModel(sa + t * (b.noise.sigma_x().matrix() - sa), a.noise.sigma_z().matrix())};
            }});
    }
    if (config.update_sigma_z) {
        groups.push_back(Group{
            "sigma_z",
            [](const Params& p, const EStepCache& c) {
                return Params{p.net, NoiseModel(p.noise.sigma_x().matrix(), m_step_sigma_z(c))};
            },
            [](const Params& a, const Params& b, double t) {
                const Mat& sa = a.noise.sigma_z().matrix();
                return Params{a.net, NoiseModel(a.noise.sigma_x().matrix(), sa + t * (b.noise.sigma_z().matrix() - sa))};
            }});
    }

    Params cur{net, noise};
    const auto t0 = clock::now();
    EStepCache cache = e_step(data, cur.net, cur.noise, eopt);
    EmResult result{cur.net, cur.noise, {}, false};
    auto elapsed = [&] { return std::chrono::duration<double, std::milli>(clock::now() - t0).count(); };
    result.trace.push_back(EmTraceRow{0, cache.nll, cache.partition->size(), elapsed(), 0});

    for (int it = 1; it <= config.max_iters; ++it) {
        const double nll_before = cache.nll;
        int halvings = 0;
        for (const Group& g : groups) {
            std::optional<Params> full;
            try {
                full = g.target(cur, cache);
            } catch (const InputError&) {
                if (!config.backtrack) throw;
            } catch (const NumericalError&) {
                if (!config.backtrack) throw;
            }
            if (!full) continue;
            double step = 1.0;
            for (int h = 0; h <= (config.backtrack ? config.max_halvings : 0); ++h) {
                try {
                    Params trial = step == 1.0 ? *full : g.blend(cur, *full, step);
                    EStepCache next = e_step(data, trial.net, trial.noise, eopt);
                    if (next.nll <= cache.nll + config.monotonicity_slack || !config.backtrack) {
                        cur = std::move(trial);
                        cache = std::move(next);
                        break;
                    }
                } catch (const InputError&) {
                    // a blended network can lose a unit (all-zero row); try a shorter step
                    if (!config.backtrack) throw;
                } catch (const NumericalError&) {
                    if (!config.backtrack) throw;
                }
                ++halvings;
                step *= 0.5;
            }
        }
        if (cache.nll > nll_before + config.monotonicity_slack)
            throw NumericalError(fmt::format("EM monotonicity violated at iteration {}: NLL {:.17g} -> {:.17g}", it,
                                             nll_before, cache.nll));
        result.trace.push_back(EmTraceRow{it, cache.nll, cache.partition->size(), elapsed(), halvings});
        if (std::fabs(nll_before - cache.nll) < config.nll_tolerance) {
            result.converged = true;
            break;
        }
    }
    result.net = cur.net;
    result.noise = cur.noise;
    return result;
}

}  // namespace cpaem

#include "cpaem/csv.hpp"
#include "cpaem/datasets.hpp"
#include "cpaem/em.hpp"
#include "cpaem/errors.hpp"
#include "cpaem/geometry.hpp"
#include "cpaem/inference.hpp"
#include "cpaem/kernels.hpp"
#include "cpaem/network_io.hpp"
#include "cpaem/oracle.hpp"
#include "cpaem/parallel.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cpaem;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    double bounding_radius = 0.0;
    bool verbose = false;
    std::string sidecar;
    double noise_var = 0.0;
    std::size_t max_regions = 1000000;
    std::vector<std::string> argv;
};

struct GenNetOpts {
    std::string spec, out;
};
struct GenDataOpts {
    std::string kind, out, model;
    std::size_t n = 0;
    double noise_sd = 0.05;
    WaveParams wave;
};
struct PartitionOpts {
    std::string model, out;
};
struct MarginalOpts {
    std::string model, data, out, grid;
    bool header = false;
};
struct PosteriorOpts {
    std::string model, x, out, grid_out;
    std::size_t grid_n = 201;
};
struct TrainOpts {
    std::string model, data, out, trace;
    int iters = 50;
    double tol = 1e-6;
    std::string update = "sigma_x,biases,weights";
    std::string sigma_x_form = "isotropic";
    bool header = false;
    bool no_backtrack = false;
};
struct OracleOpts {
    std::string model, x, what = "marginal";
    std::uint64_t n = 1000000;
};

Globals g;

void log(const std::string& msg) {
    if (g.verbose) fmt::print(stderr, "[cpaem] {}\n", msg);
}

std::string num(double v) { return format_double(v); }

void ensure_parent_dir(const std::string& path) {
    if (path.empty()) return;
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty() && !fs::is_directory(parent))
        throw InputError("output directory '" + parent.string() + "' does not exist");
}

void write_json(const std::string& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    out << doc.dump(2) << '\n';
    if (!out) throw InputError("write to '" + path + "' failed");
}

NoiseModel resolve_noise(const ModelDocument& doc) {
    const int d = doc.net.output_dim(), s = doc.net.latent_dim();
    if (g.noise_var > 0.0) {
        const Mat sz = doc.noise ? doc.noise->sigma_z().matrix() : Mat::Identity(s, s);
        return NoiseModel(g.noise_var * Mat::Identity(d, d), sz);
    }
    if (doc.noise) return *doc.noise;
    return NoiseModel::isotropic(d, 0.1, s);
}

double resolve_radius(const NoiseModel& noise) {
    return g.bounding_radius > 0.0 ? g.bounding_radius : default_bounding_radius(noise.sigma_z().matrix());
}

json noise_json(const NoiseModel& noise) {
    return {{"sigma_x", matrix_to_json(noise.sigma_x().matrix())}, {"sigma_z", matrix_to_json(noise.sigma_z().matrix())}};
}

json code_json(const ActivationCode& code) {
    json out = json::array();
    for (const auto& layer : code.signs) {
        json row = json::array();
        for (auto s : layer) row.push_back(static_cast<int>(s));
        out.push_back(row);
    }
    return out;
}

void write_sidecar(const std::string& command, const std::string& first_output, json config) {
    std::string path = g.sidecar;
    if (path.empty()) path = first_output.empty() ? "cpaem-" + command + ".run.json" : first_output + ".run.json";
    config["command"] = command;
    config["argv"] = g.argv;
    config["seed"] = g.seed;
    config["threads"] = thread_count();
    config["verbose"] = g.verbose;
    config["max_regions"] = g.max_regions;
    config["simd"] = kernels::isa_name(kernels::active_isa());
    write_json(path, config);
    log("config written to " + path);
}

Partition build_partition(const GenerativeNetwork& net, const NoiseModel& noise) {
    PartitionOptions opt;
    opt.bounding_radius = resolve_radius(noise);
    opt.max_regions = g.max_regions;
    Partition p = enumerate_partition(net, Vec::Zero(net.latent_dim()), opt);
    log(fmt::format("{} regions within radius {}", p.size(), num(opt.bounding_radius)));
    return p;
}

Vec parse_x(const std::string& text, int dim) {
    const Vec x = parse_vector(text);
    if (x.size() != dim) throw InputError(fmt::format("--x has {} entries, the model outputs {}", x.size(), dim));
    return x;
}

int run_gen_net(const GenNetOpts& o) {
    ensure_parent_dir(o.out);
    const NetSpec spec = parse_net_spec(o.spec);
    write_sidecar("gen-net", o.out, {{"spec", o.spec}, {"out", o.out}});
    const GenerativeNetwork net = random_network(spec, g.seed);
    std::optional<NoiseModel> noise;
    if (g.noise_var > 0.0) noise = NoiseModel::isotropic(net.output_dim(), g.noise_var, net.latent_dim());
    save_model(o.out, net, noise);
    fmt::print("wrote {} ({} layers, {} hidden units)\n", o.out, net.depth(), net.hidden_units());
    return 0;
}

int run_gen_data(const GenDataOpts& o) {
    ensure_parent_dir(o.out);
    if (o.n == 0) throw InputError("--n must be at least 1");
    json cfg{{"kind", o.kind}, {"n", o.n}, {"out", o.out}};
    std::vector<Vec> rows;
    if (o.kind == "circle") {
        cfg["noise_sd"] = o.noise_sd;
        write_sidecar("gen-data", o.out, cfg);
        rows = circle_dataset(o.n, o.noise_sd, g.seed);
    } else if (o.kind == "wave") {
        cfg["wave"] = {{"amplitude", o.wave.amplitude},
                       {"frequency", o.wave.frequency},
                       {"half_width", o.wave.half_width},
                       {"noise_sd", o.wave.noise_sd}};
        write_sidecar("gen-data", o.out, cfg);
        rows = wave_dataset(o.n, o.wave, g.seed);
    } else if (o.kind == "from-model") {
        if (o.model.empty()) throw InputError("from-model needs --model");
        const ModelDocument doc = load_model(o.model);
        const NoiseModel noise = resolve_noise(doc);
        cfg["model"] = o.model;
        cfg["noise"] = noise_json(noise);
        write_sidecar("gen-data", o.out, cfg);
        rows = model_dataset(o.n, doc.net, noise, g.seed);
    } else {
        throw InputError("unknown dataset kind '" + o.kind + "' (expected circle, wave or from-model)");
    }
    write_csv(o.out, rows);
    fmt::print("wrote {} rows to {}\n", rows.size(), o.out);
    return 0;
}

int run_partition(const PartitionOpts& o) {
    ensure_parent_dir(o.out);
    const ModelDocument doc = load_model(o.model);
    const NoiseModel noise = resolve_noise(doc);
    write_sidecar("partition", o.out,
                  {{"model", o.model}, {"out", o.out}, {"bounding_radius", resolve_radius(noise)}, {"noise", noise_json(noise)}});
    const Partition p = build_partition(doc.net, noise);
    json regions = json::array();
    for (const Region& r : p.regions) {
        json verts = json::array();
        for (const Vec& v : r.vertices) verts.push_back(vector_to_json(v));
        regions.push_back({{"code", code_json(r.code)},
                           {"vertices", verts},
                           {"affine", {{"A", matrix_to_json(r.affine.slope)}, {"b", vector_to_json(r.affine.offset)}}},
                           {"clipped", r.clipped}});
    }
    if (!o.out.empty()) write_json(o.out, regions);
    else fmt::print("{}\n", regions.dump(2));
    fmt::print(stderr, "regions: {}\nprior tail mass outside the box: {}\n", p.size(), num(prior_tail_mass(p, noise)));
    return 0;
}

std::vector<Vec> grid_points(const std::string& spec, int dim) {
    const Vec parts = parse_vector(spec);
    if (parts.size() != 3 || !(parts[1] > parts[0]) || parts[2] < 2 || parts[2] != std::floor(parts[2]))
        throw InputError("--grid expects lo,hi,n with lo < hi and integer n >= 2");
    if (dim > 2) throw InputError("--grid supports at most two output dimensions");
    const auto n = static_cast<std::size_t>(parts[2]);
    auto at = [&](std::size_t i) { return parts[0] + (parts[1] - parts[0]) * static_cast<double>(i) / static_cast<double>(n - 1); };
    std::vector<Vec> pts;
    if (dim == 1) {
        for (std::size_t i = 0; i < n; ++i) pts.push_back(Vec::Constant(1, at(i)));
    } else {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                Vec p(2);
                p << at(i), at(j);
                pts.push_back(p);
            }
    }
    return pts;
}

int run_marginal(const MarginalOpts& o) {
    if (o.data.empty() == o.grid.empty()) throw InputError("marginal needs exactly one of --data or --grid");
    ensure_parent_dir(o.out);
    const ModelDocument doc = load_model(o.model);
    const NoiseModel noise = resolve_noise(doc);
    const std::vector<Vec> xs = o.data.empty() ? grid_points(o.grid, doc.net.output_dim()) : read_csv(o.data, o.header);
    if (xs.front().size() != doc.net.output_dim()) throw InputError("data columns do not match the model's output dimension");
    write_sidecar("marginal", o.out,
                  {{"model", o.model},
                   {"data", o.data},
                   {"grid", o.grid},
                   {"out", o.out},
                   {"header", o.header},
                   {"bounding_radius", resolve_radius(noise)},
                   {"noise", noise_json(noise)}});
    const Partition p = build_partition(doc.net, noise);
    const ExactPosterior post(p, noise);
    std::vector<double> lp(xs.size());
    std::vector<char> underflow(xs.size(), 0);
    const bool on_grid = !o.grid.empty();
    parallel_for(xs.size(), [&](std::size_t i) {
        try {
            lp[i] = post.log_marginal(xs[i]);
        } catch (const NumericalError&) {
            // grid corners far from the model can have no significant mass
            if (!on_grid) throw;
            lp[i] = -std::numeric_limits<double>::infinity();
            underflow[i] = 1;
        }
    });
    if (const auto n_under = std::count(underflow.begin(), underflow.end(), 1); n_under > 0)
        fmt::print(stderr, "warning: {} grid points have no representable mass; written as -inf\n", n_under);
    std::vector<Vec> rows;
    std::vector<std::string> header;
    if (o.grid.empty()) {
        header = {"log_p"};
        for (double v : lp) rows.push_back(Vec::Constant(1, v));
    } else {
        for (int k = 0; k < doc.net.output_dim(); ++k) header.push_back(fmt::format("x{}", k + 1));
        header.push_back("log_p");
        for (std::size_t i = 0; i < xs.size(); ++i) {
            Vec r(xs[i].size() + 1);
            r << xs[i], lp[i];
            rows.push_back(r);
        }
    }
    if (!o.out.empty()) {
        write_csv(o.out, rows, header);
    } else {
        for (const Vec& r : rows) {
            std::string line;
            for (Eigen::Index k = 0; k < r.size(); ++k) line += (k ? "," : "") + num(r[k]);
            fmt::print("{}\n", line);
        }
    }
    double nll = 0.0;
    for (double v : lp) nll -= v;
    fmt::print(stderr, "rows: {}\nnll: {}\nprior tail mass outside the box: {}\n", xs.size(), num(nll),
               num(prior_tail_mass(p, noise)));
    return 0;
}

int run_posterior(const PosteriorOpts& o) {
    ensure_parent_dir(o.out);
    ensure_parent_dir(o.grid_out);
    const ModelDocument doc = load_model(o.model);
    const NoiseModel noise = resolve_noise(doc);
    const Vec x = parse_x(o.x, doc.net.output_dim());
    const int s = doc.net.latent_dim();
    if (!o.grid_out.empty() && s > 2) throw InputError("--grid-out supports latent dimension at most 2");
    if (o.grid_n < 2) throw InputError("--grid-n must be at least 2");
    write_sidecar("posterior", o.out.empty() ? o.grid_out : o.out,
                  {{"model", o.model},
                   {"x", vector_to_json(x)},
                   {"out", o.out},
                   {"grid_out", o.grid_out},
                   {"grid_n", o.grid_n},
                   {"bounding_radius", resolve_radius(noise)},
                   {"noise", noise_json(noise)}});
    const Partition p = build_partition(doc.net, noise);
    const ExactPosterior post(p, noise);
    const PosteriorSummary sum = post.moments(x);
    const Vec zmap = post.map_latent(x);

    fmt::print("log_marginal {}\n", num(sum.log_marginal));
    json regions = json::array();
    for (const RegionTerm& t : sum.per_region) {
        const Region& r = p.regions[static_cast<std::size_t>(t.region)];
        fmt::print("region {} weight {}\n", r.code.str(), num(t.weight));
        regions.push_back({{"code", code_json(r.code)},
                           {"weight", t.weight},
                           {"e1", vector_to_json(t.e1)},
                           {"e2", matrix_to_json(t.e2)}});
    }
    fmt::print("mean {}\nmap {}\n", vector_to_json(sum.total_e1).dump(), vector_to_json(zmap).dump());
    fmt::print(stderr, "prior tail mass outside the box: {}\n", num(prior_tail_mass(p, noise)));
    if (!o.out.empty())
        write_json(o.out, {{"log_marginal", sum.log_marginal},
                           {"regions", regions},
                           {"mean", vector_to_json(sum.total_e1)},
                           {"second_moment", matrix_to_json(sum.total_e2)},
                           {"map", vector_to_json(zmap)}});
    if (!o.grid_out.empty()) {
        const double r = p.bounding_radius;
        auto at = [&](std::size_t i) { return -r + 2.0 * r * static_cast<double>(i) / static_cast<double>(o.grid_n - 1); };
        std::vector<Vec> pts;
        if (s == 1) {
            for (std::size_t i = 0; i < o.grid_n; ++i) pts.push_back(Vec::Constant(1, at(i)));
        } else {
            for (std::size_t i = 0; i < o.grid_n; ++i)
                for (std::size_t j = 0; j < o.grid_n; ++j) {
                    Vec z(2);
                    z << at(i), at(j);
                    pts.push_back(z);
                }
        }
        std::vector<Vec> rows(pts.size());
        parallel_for(pts.size(), [&](std::size_t i) {
            Vec row(s + 1);
            row << pts[i], std::exp(post.log_density(pts[i], x, doc.net));
            rows[i] = row;
        });
        std::vector<std::string> header;
        for (int k = 0; k < s; ++k) header.push_back(fmt::format("z{}", k + 1));
        header.push_back("density");
        write_csv(o.grid_out, rows, header);
    }
    return 0;
}

CovarianceForm parse_form(const std::string& s) {
    if (s == "isotropic") return CovarianceForm::Isotropic;
    if (s == "diagonal") return CovarianceForm::Diagonal;
    if (s == "full") return CovarianceForm::Full;
    throw InputError("--sigma-x-form must be isotropic, diagonal or full");
}

int run_train(const TrainOpts& o) {
    ensure_parent_dir(o.out);
    ensure_parent_dir(o.trace);
    const ModelDocument doc = load_model(o.model);
    const NoiseModel noise = resolve_noise(doc);
    const std::vector<Vec> data = read_csv(o.data, o.header);
    if (data.front().size() != doc.net.output_dim()) throw InputError("data columns do not match the model's output dimension");
    EmConfig cfg;
    cfg.max_iters = o.iters;
    cfg.nll_tolerance = o.tol;
    parse_update_flags(o.update, cfg);
    cfg.sigma_x_form = parse_form(o.sigma_x_form);
    cfg.bounding_radius = resolve_radius(noise);
    cfg.backtrack = !o.no_backtrack;
    cfg.max_regions = g.max_regions;
    write_sidecar("train-em", o.out,
                  {{"model", o.model},
                   {"data", o.data},
                   {"out", o.out},
                   {"trace", o.trace},
                   {"iters", o.iters},
                   {"tol", o.tol},
                   {"update", o.update},
                   {"sigma_x_form", o.sigma_x_form},
                   {"header", o.header},
                   {"backtrack", cfg.backtrack},
                   {"bounding_radius", cfg.bounding_radius},
                   {"noise", noise_json(noise)}});
    const EmResult res = em_fit(data, doc.net, noise, cfg);
    for (const EmTraceRow& r : res.trace)
        log(fmt::format("iter {} nll {} regions {} halvings {}", r.iteration, num(r.nll), r.card_omega, r.halvings));
    save_model(o.out, res.net, res.noise);
    if (!o.trace.empty()) {
        std::vector<Vec> rows;
        for (const EmTraceRow& r : res.trace) {
            Vec row(4);
            row << r.iteration, r.nll, static_cast<double>(r.card_omega), r.wall_ms;
            rows.push_back(row);
        }
        write_csv(o.trace, rows, {"iteration", "nll", "card_omega", "wall_ms"});
    }
    fmt::print("iterations {}\ninitial nll {}\nfinal nll {}\nconverged {}\n", res.trace.size() - 1,
               num(res.trace.front().nll), num(res.trace.back().nll), res.converged ? "yes" : "no");
    return 0;
}

bool report(const std::string& label, double analytic, double oracle, double se) {
    const bool pass = std::fabs(analytic - oracle) <= 3.0 * se;
    fmt::print("{} analytic {} oracle {} stderr {} {}\n", label, num(analytic), num(oracle), num(se), pass ? "PASS" : "FAIL");
    return pass;
}

int run_oracle(const OracleOpts& o) {
    const ModelDocument doc = load_model(o.model);
    const NoiseModel noise = resolve_noise(doc);
    if (o.n < 2) throw InputError("--n must be at least 2");
    const bool needs_x = o.what != "mass";
    Vec x;
    if (needs_x) {
        if (o.x.empty()) throw InputError("--x is required for --what " + o.what);
        x = parse_x(o.x, doc.net.output_dim());
    }
    if (o.what != "marginal" && o.what != "posterior" && o.what != "mass" && o.what != "moments")
        throw InputError("--what must be marginal, posterior, mass or moments");
    write_sidecar("oracle-check", "",
                  {{"model", o.model},
                   {"x", needs_x ? vector_to_json(x) : json(nullptr)},
                   {"what", o.what},
                   {"n", o.n},
                   {"bounding_radius", resolve_radius(noise)},
                   {"noise", noise_json(noise)}});
    const Partition p = build_partition(doc.net, noise);
    const ExactPosterior post(p, noise);
    bool ok = true;
    if (o.what == "marginal") {
        const OracleEstimate e = mc_marginal(x, doc.net, noise, o.n, g.seed);
        ok = report("p(x)", std::exp(post.log_marginal(x)), e.scalar(), e.scalar_stderr());
    } else if (o.what == "posterior") {
        const PosteriorSummary sum = post.moments(x);
        const IsPosteriorEstimate e = is_posterior_moments(x, doc.net, noise, o.n, g.seed);
        if (e.low_ess) fmt::print("warning: effective sample size {} is low\n", num(e.ess));
        for (const RegionTerm& t : sum.per_region) {
            const ActivationCode& code = p.regions[static_cast<std::size_t>(t.region)].code;
            const auto it = e.share.find(code);
            if (it == e.share.end()) {
                fmt::print("weight[{}] analytic {} oracle none (no samples)\n", code.str(), num(t.weight));
                continue;
            }
            ok &= report("weight[" + code.str() + "]", t.weight, it->second.scalar(), it->second.scalar_stderr());
        }
    } else if (o.what == "moments") {
        const PosteriorSummary sum = post.moments(x);
        const IsPosteriorEstimate e = is_posterior_moments(x, doc.net, noise, o.n, g.seed);
        if (e.low_ess) fmt::print("warning: effective sample size {} is low\n", num(e.ess));
        for (Eigen::Index i = 0; i < sum.total_e1.size(); ++i)
            ok &= report(fmt::format("e1[{}]", i), sum.total_e1[i], e.e1.value(i, 0), e.e1.stderr_(i, 0));
        for (Eigen::Index i = 0; i < sum.total_e2.rows(); ++i)
            for (Eigen::Index j = i; j < sum.total_e2.cols(); ++j)
                ok &= report(fmt::format("e2[{},{}]", i, j), sum.total_e2(i, j), e.e2.value(i, j), e.e2.stderr_(i, j));
    } else {
        const auto counts = mc_code_counts(doc.net, noise.sigma_z().matrix(), o.n, g.seed);
        const double n = static_cast<double>(o.n);
        const Vec zero = Vec::Zero(doc.net.latent_dim());
        for (const Region& r : p.regions) {
            const double mass = region_mass(r.cones, zero, noise.sigma_z().matrix());
            const auto it = counts.find(r.code);
            const double frac = it == counts.end() ? 0.0 : static_cast<double>(it->second) / n;
            ok &= report("mass[" + r.code.str() + "]", mass, frac, std::sqrt(mass * (1.0 - mass) / n));
        }
    }
    fmt::print("{}\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : static_cast<int>(ExitCode::Numerical);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact inference and EM for piecewise-affine generative networks"};
    app.require_subcommand(1);
    app.fallthrough();
    g.argv.assign(argv, argv + argc);

    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads (default: CPAEM_THREADS, else hardware)");
    app.add_option("--bounding-radius", g.bounding_radius, "Latent box half-width (default: 8 prior std)")
        ->check(CLI::PositiveNumber);
    app.add_flag("--verbose,-v", g.verbose, "Progress on stderr");
    app.add_option("--sidecar", g.sidecar, "Where to write the resolved run config");
    app.add_option("--noise-var", g.noise_var, "Isotropic observation variance, overriding the model file")
        ->check(CLI::PositiveNumber);
    app.add_option("--max-regions", g.max_regions, "Abort when the partition exceeds this many regions")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    GenNetOpts gn;
    auto* c_gn = app.add_subcommand("gen-net", "Random network from a spec such as '1-8-2 relu'");
    c_gn->add_option("--spec", gn.spec)->required();
    c_gn->add_option("--out", gn.out)->required();

    GenDataOpts gd;
    auto* c_gd = app.add_subcommand("gen-data", "Toy dataset CSV");
    c_gd->add_option("--kind", gd.kind, "circle, wave or from-model")->required();
    c_gd->add_option("--n", gd.n)->required();
    c_gd->add_option("--out", gd.out)->required();
    c_gd->add_option("--model", gd.model)->check(CLI::ExistingFile);
    c_gd->add_option("--noise-sd", gd.noise_sd, "circle noise")->capture_default_str();
    c_gd->add_option("--amplitude", gd.wave.amplitude)->capture_default_str();
    c_gd->add_option("--frequency", gd.wave.frequency)->capture_default_str();
    c_gd->add_option("--half-width", gd.wave.half_width)->capture_default_str();
    c_gd->add_option("--wave-noise-sd", gd.wave.noise_sd)->capture_default_str();

    PartitionOpts pa;
    auto* c_pa = app.add_subcommand("partition", "Enumerate the latent partition as JSON");
    c_pa->add_option("--model", pa.model)->required()->check(CLI::ExistingFile);
    c_pa->add_option("--out", pa.out);

    MarginalOpts ma;
    auto* c_ma = app.add_subcommand("marginal", "log p(x) per data row or over a grid");
    c_ma->add_option("--model", ma.model)->required()->check(CLI::ExistingFile);
    c_ma->add_option("--data", ma.data)->check(CLI::ExistingFile);
    c_ma->add_option("--grid", ma.grid, "lo,hi,n shared by every output axis");
    c_ma->add_option("--out", ma.out);
    c_ma->add_flag("--header", ma.header, "Data file has a header row");

    PosteriorOpts po;
    auto* c_po = app.add_subcommand("posterior", "Per-region posterior weights and moments for one observation");
    c_po->add_option("--model", po.model)->required()->check(CLI::ExistingFile);
    c_po->add_option("--x", po.x)->required();
    c_po->add_option("--out", po.out);
    c_po->add_option("--grid-out", po.grid_out);
    c_po->add_option("--grid-n", po.grid_n)->capture_default_str();

    TrainOpts tr;
    auto* c_tr = app.add_subcommand("train-em", "Fit by exact EM");
    c_tr->add_option("--model", tr.model)->required()->check(CLI::ExistingFile);
    c_tr->add_option("--data", tr.data)->required()->check(CLI::ExistingFile);
    c_tr->add_option("--out", tr.out)->required();
    c_tr->add_option("--trace", tr.trace);
    c_tr->add_option("--iters", tr.iters)->capture_default_str()->check(CLI::NonNegativeNumber);
    c_tr->add_option("--tol", tr.tol)->capture_default_str();
    c_tr->add_option("--update", tr.update)->capture_default_str();
    c_tr->add_option("--sigma-x-form", tr.sigma_x_form)->capture_default_str();
    c_tr->add_flag("--header", tr.header);
    c_tr->add_flag("--no-backtrack", tr.no_backtrack);

    OracleOpts orc;
    auto* c_or = app.add_subcommand("oracle-check", "Compare an analytical quantity with its sampling oracle");
    c_or->add_option("--model", orc.model)->required()->check(CLI::ExistingFile);
    c_or->add_option("--x", orc.x);
    c_or->add_option("--what", orc.what)->capture_default_str();
    c_or->add_option("--n", orc.n)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::Usage);
    }

    try {
        if (g.threads > 0) set_thread_count(g.threads);
        if (c_gn->parsed()) return run_gen_net(gn);
        if (c_gd->parsed()) return run_gen_data(gd);
        if (c_pa->parsed()) return run_partition(pa);
        if (c_ma->parsed()) return run_marginal(ma);
        if (c_po->parsed()) return run_posterior(po);
        if (c_tr->parsed()) return run_train(tr);
        if (c_or->parsed()) return run_oracle(orc);
    } catch (const std::bad_alloc&) {
        fmt::print(stderr, "error: out of memory\n");
        return static_cast<int>(ExitCode::Resource);
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return static_cast<int>(exit_code_for(e));
    }
    return static_cast<int>(ExitCode::Usage);
}

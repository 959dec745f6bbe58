#include "cpaem/datasets.hpp"

#include "cpaem/errors.hpp"
#include "cpaem/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace cpaem {

namespace {
constexpr std::uint32_t kStreamData = 1;
constexpr std::uint32_t kStreamInit = 2;
}  // namespace

std::vector<Vec> circle_dataset(std::size_t n, double noise_sd, std::uint64_t seed) {
    if (n == 0) throw InputError("dataset size must be at least 1");
    Rng rng(seed, kStreamData);
    std::vector<Vec> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = 2.0 * std::numbers::pi * rng.uniform();
        Vec x(2);
        x << std::cos(t) + rng.normal(0.0, noise_sd), std::sin(t) + rng.normal(0.0, noise_sd);
        out.push_back(std::move(x));
    }
    return out;
}

std::vector<Vec> wave_dataset(std::size_t n, const WaveParams& p, std::uint64_t seed) {
    if (n == 0) throw InputError("dataset size must be at least 1");
    Rng rng(seed, kStreamData);
    std::vector<Vec> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double x1 = p.half_width * (2.0 * rng.uniform() - 1.0);
        Vec x(2);
        x << x1, p.amplitude * std::sin(p.frequency * x1) + rng.normal(0.0, p.noise_sd);
        out.push_back(std::move(x));
    }
    return out;
}

std::vector<Vec> model_dataset(std::size_t n, const GenerativeNetwork& net, const NoiseModel& noise,
                               std::uint64_t seed) {
    if (n == 0) throw InputError("dataset size must be at least 1");
    Rng rng(seed, kStreamData);
    const Mat& lz = noise.sigma_z().cholesky();
    const Mat& lx = noise.sigma_x().cholesky();
    std::vector<Vec> out;
    for (std::size_t i = 0; i < n; ++i) {
        Vec ez(net.latent_dim()), ex(net.output_dim());
        for (Eigen::Index k = 0; k < ez.size(); ++k) ez[k] = rng.normal();
        for (Eigen::Index k = 0; k < ex.size(); ++k) ex[k] = rng.normal();
        out.push_back(forward(net, lz * ez) + lx * ex);
    }
    return out;
}

NetSpec parse_net_spec(const std::string& spec) {
    std::istringstream in(spec);
    std::string dims_part, act_part;
    in >> dims_part >> act_part;
    std::string extra;
    if (dims_part.empty() || (in >> extra)) throw InputError("net spec must look like '1-8-2 relu'");
    NetSpec out;
    std::stringstream ds(dims_part);
    std::string tok;
    while (std::getline(ds, tok, '-')) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(tok, &used);
        } catch (const std::exception&) {
            throw InputError("net spec: bad dimension '" + tok + "'");
        }
        if (used != tok.size() || v < 1) throw InputError("net spec: bad dimension '" + tok + "'");
        out.dims.push_back(v);
    }
    if (out.dims.size() < 2) throw InputError("net spec needs at least a latent and an output dimension");
    if (act_part.empty()) act_part = "relu";
    const auto colon = act_part.find(':');
    const std::string name = act_part.substr(0, colon);
    out.activation.kind = activation_kind_from_string(name);
    if (out.activation.kind == ActivationKind::LeakyRelu) {
        if (colon == std::string::npos) throw InputError("leaky_relu needs a slope, e.g. leaky_relu:0.2");
        try {
            out.activation.eta = std::stod(act_part.substr(colon + 1));
        } catch (const std::exception&) {
            throw InputError("net spec: bad leaky_relu slope");
        }
        if (!(out.activation.eta > 0.0 && out.activation.eta < 1.0))
            throw InputError("net spec: leaky_relu slope must lie in (0, 1)");
    } else if (colon != std::string::npos) {
        throw InputError("only leaky_relu takes a parameter");
    }
    return out;
}

GenerativeNetwork random_network(const NetSpec& spec, std::uint64_t seed) {
    Rng rng(seed, kStreamInit);
    std::vector<Layer> layers;
    for (std::size_t l = 1; l < spec.dims.size(); ++l) {
        Layer layer;
        const int rows = spec.dims[l], cols = spec.dims[l - 1];
        layer.weight.resize(rows, cols);
        const double sd = 1.0 / std::sqrt(static_cast<double>(cols));
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) layer.weight(r, c) = rng.normal(0.0, sd);
        layer.bias.resize(rows);
        for (int r = 0; r < rows; ++r) layer.bias[r] = rng.normal(0.0, 0.1);
        layer.activation = l + 1 == spec.dims.size() ? Activation::identity() : spec.activation;
        layers.push_back(std::move(layer));
    }
    return GenerativeNetwork(std::move(layers));
}

}  // namespace cpaem

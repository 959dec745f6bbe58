#include "cpaem/network.hpp"

#include "cpaem/errors.hpp"

#include <cmath>
#include <string>

namespace cpaem {

double Activation::negative_slope() const noexcept {
    switch (kind) {
        case ActivationKind::Identity: return 1.0;
        case ActivationKind::Relu: return 0.0;
        case ActivationKind::LeakyRelu: return eta;
        case ActivationKind::Abs: return -1.0;
    }
    return 1.0;
}

double Activation::apply(double h) const noexcept {
    return h >= 0.0 ? h : negative_slope() * h;
}

std::string to_string(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::Identity: return "identity";
        case ActivationKind::Relu: return "relu";
        case ActivationKind::LeakyRelu: return "leaky_relu";
        case ActivationKind::Abs: return "abs";
    }
    return "identity";
}

ActivationKind activation_kind_from_string(const std::string& name) {
    if (name == "identity") return ActivationKind::Identity;
    if (name == "relu") return ActivationKind::Relu;
    if (name == "leaky_relu") return ActivationKind::LeakyRelu;
    if (name == "abs") return ActivationKind::Abs;
    throw InputError("unknown activation '" + name + "'");
}

std::size_t ActivationCode::total_units() const noexcept {
    std::size_t n = 0;
    for (const auto& layer : signs) n += layer.size();
    return n;
}

std::string ActivationCode::str() const {
    std::string out;
    for (std::size_t l = 0; l < signs.size(); ++l) {
        if (l > 0) out += '|';
        for (auto s : signs[l]) out += s > 0 ? '+' : '-';
    }
    return out;
}

std::size_t ActivationCodeHash::operator()(const ActivationCode& code) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (const auto& layer : code.signs) {
        for (auto s : layer) h = (h ^ static_cast<std::size_t>(s > 0 ? 1 : 2)) * 1099511628211ull;
        h = (h ^ 3u) * 1099511628211ull;
    }
    return h;
}

GenerativeNetwork::GenerativeNetwork(std::vector<Layer> layers, DegeneratePolicy policy)
    : layers_(std::move(layers)), policy_(policy) {
    if (layers_.empty()) throw InputError("network needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Layer& layer = layers_[i];
        const std::string where = "layer " + std::to_string(i + 1);
        if (layer.weight.rows() == 0 || layer.weight.cols() == 0)
            throw InputError(where + ": empty weight matrix");
        if (layer.bias.size() != layer.weight.rows())
            throw InputError(where + ": bias length does not match weight rows");
        if (i > 0 && layer.weight.cols() != layers_[i - 1].weight.rows())
            throw InputError(where + ": weight columns do not match previous layer width");
        if (!layer.weight.allFinite() || !layer.bias.allFinite())
            throw InputError(where + ": non-finite parameters");
        const bool last = i + 1 == layers_.size();
        if (last && layer.activation.kind != ActivationKind::Identity)
            throw InputError("the output layer must use the identity activation");
        if (!last && layer.activation.kind == ActivationKind::Identity)
            throw InputError(where + ": hidden layers need relu, leaky_relu or abs");
        if (layer.activation.kind == ActivationKind::LeakyRelu &&
            !(layer.activation.eta > 0.0 && layer.activation.eta < 1.0))
            throw InputError(where + ": leaky_relu eta must lie in (0, 1)");
        if (!last) {
            for (Eigen::Index k = 0; k < layer.weight.rows(); ++k) {
                if (layer.weight.row(k).cwiseAbs().maxCoeff() == 0.0) {
                    if (policy_ == DegeneratePolicy::Reject)
                        throw InputError(where + ": unit " + std::to_string(k) +
                                         " has an all-zero weight row (degenerate)");
                    degenerate_ = true;
                }
            }
        }
    }
}

int GenerativeNetwork::width(int l) const {
    if (l == 0) return latent_dim();
    return static_cast<int>(layer(l).weight.rows());
}

int GenerativeNetwork::hidden_units() const noexcept {
    int n = 0;
    for (int l = 0; l + 1 < depth(); ++l) n += static_cast<int>(layers_[l].weight.rows());
    return n;
}

const Layer& GenerativeNetwork::layer(int l) const {
    if (l < 1 || l > depth()) throw InputError("layer index " + std::to_string(l) + " out of range");
    return layers_[static_cast<std::size_t>(l - 1)];
}

GenerativeNetwork GenerativeNetwork::with_weight(int l, const Mat& w) const {
    auto copy = layers_;
    const Layer& old = layer(l);
    if (w.rows() != old.weight.rows() || w.cols() != old.weight.cols())
        throw InputError("replacement weight has the wrong shape");
    copy[static_cast<std::size_t>(l - 1)].weight = w;
    return GenerativeNetwork(std::move(copy), policy_);
}

GenerativeNetwork GenerativeNetwork::with_bias(int l, const Vec& v) const {
    auto copy = layers_;
    if (v.size() != layer(l).bias.size()) throw InputError("replacement bias has the wrong length");
    copy[static_cast<std::size_t>(l - 1)].bias = v;
    return GenerativeNetwork(std::move(copy), policy_);
}

NoiseModel::NoiseModel(const Mat& sigma_x, const Mat& sigma_z)
    : sigma_x_(sigma_x, "sigma_x"), sigma_z_(sigma_z, "sigma_z") {}

NoiseModel NoiseModel::isotropic(int output_dim, double var_x, int latent_dim, double var_z) {
    return NoiseModel(var_x * Mat::Identity(output_dim, output_dim),
                      var_z * Mat::Identity(latent_dim, latent_dim));
}

Vec forward(const GenerativeNetwork& net, const Vec& z) {
    if (z.size() != net.latent_dim()) throw InputError("latent vector has the wrong dimension");
    Vec a = z;
    for (const Layer& layer : net.layers()) {
        Vec h = layer.weight * a + layer.bias;
        for (Eigen::Index k = 0; k < h.size(); ++k) h[k] = layer.activation.apply(h[k]);
        a = std::move(h);
    }
    return a;
}

ActivationCode activation_code(const GenerativeNetwork& net, const Vec& z) {
    if (z.size() != net.latent_dim()) throw InputError("latent vector has the wrong dimension");
    ActivationCode code;
    code.signs.reserve(static_cast<std::size_t>(net.hidden_layers()));
    Vec a = z;
    for (int l = 1; l < net.depth(); ++l) {
        const Layer& layer = net.layer(l);
        Vec h = layer.weight * a + layer.bias;
        std::vector<std::int8_t> q(static_cast<std::size_t>(h.size()));
        for (Eigen::Index k = 0; k < h.size(); ++k) {
            q[static_cast<std::size_t>(k)] = h[k] >= 0.0 ? 1 : -1;
            h[k] = layer.activation.apply(h[k]);
        }
        code.signs.push_back(std::move(q));
        a = std::move(h);
    }
    return code;
}

bool code_matches(const GenerativeNetwork& net, const ActivationCode& code) noexcept {
    if (static_cast<int>(code.signs.size()) != net.hidden_layers()) return false;
    for (int l = 1; l < net.depth(); ++l) {
        const auto& q = code.signs[static_cast<std::size_t>(l - 1)];
        if (static_cast<int>(q.size()) != net.width(l)) return false;
        for (auto s : q)
            if (s != 1 && s != -1) return false;
    }
    return true;
}

namespace {

void require_code(const GenerativeNetwork& net, const ActivationCode& code) {
    if (!code_matches(net, code)) throw InputError("activation code does not match the network shape");
}

}  // namespace

Vec activation_diagonal(const GenerativeNetwork& net, const ActivationCode& code, int l) {
    require_code(net, code);
    if (l == net.depth()) return Vec::Ones(net.output_dim());
    if (l < 1 || l > net.depth()) throw InputError("layer index out of range");
    const auto& q = code.signs[static_cast<std::size_t>(l - 1)];
    const double neg = net.layer(l).activation.negative_slope();
    Vec d(static_cast<Eigen::Index>(q.size()));
    for (std::size_t k = 0; k < q.size(); ++k) d[static_cast<Eigen::Index>(k)] = q[k] > 0 ? 1.0 : neg;
    return d;
}

std::pair<Mat, Vec> partial_affine(const GenerativeNetwork& net, const ActivationCode& code, int l) {
    require_code(net, code);
    if (l < 1 || l > net.depth()) throw InputError("layer index out of range");
    Mat a = net.layer(1).weight;
    Vec b = net.layer(1).bias;
    for (int i = 2; i <= l; ++i) {
        const Vec d = activation_diagonal(net, code, i - 1);
        const Layer& layer = net.layer(i);
        a = layer.weight * (d.asDiagonal() * a);
        b = layer.weight * (d.asDiagonal() * b) + layer.bias;
    }
    return {std::move(a), std::move(b)};
}

AffineMap per_region_affine(const GenerativeNetwork& net, const ActivationCode& code) {
    auto [a, b] = partial_affine(net, code, net.depth());
    return AffineMap{std::move(a), std::move(b)};
}

Mat backprop_affine(const GenerativeNetwork& net, const ActivationCode& code, int l) {
    require_code(net, code);
    if (l < 1 || l > net.depth()) throw InputError("layer index out of range");
    Mat m = Mat::Identity(net.output_dim(), net.output_dim());
    for (int i = net.depth(); i > l; --i) {
        // m currently maps the output of layer i to x; extend through W^i D^{i-1}.
        m = m * net.layer(i).weight;
        if (i - 1 > l) m = m * activation_diagonal(net, code, i - 1).asDiagonal();
    }
    return m;
}

std::pair<Mat, Vec> layer_input_affine(const GenerativeNetwork& net, const ActivationCode& code, int l) {
    require_code(net, code);
    if (l < 1 || l > net.depth()) throw InputError("layer index out of range");
    if (l == 1) return {Mat::Identity(net.latent_dim(), net.latent_dim()), Vec::Zero(net.latent_dim())};
    auto [a, b] = partial_affine(net, code, l - 1);
    const Vec d = activation_diagonal(net, code, l - 1);
    return {d.asDiagonal() * a, d.asDiagonal() * b};
}

}  // namespace cpaem

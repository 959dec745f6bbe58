#pragma once

#include "cpaem/linalg.hpp"

#include <compare>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cpaem {

enum class ActivationKind { Identity, Relu, LeakyRelu, Abs };

struct Activation {
    ActivationKind kind = ActivationKind::Identity;
    double eta = 0.0;  // negative-side slope, leaky_relu only

    /// Slope applied on the q = -1 side: 0, eta, -1 or 1 (identity).
    double negative_slope() const noexcept;
    double apply(double h) const noexcept;

    static Activation identity() { return {ActivationKind::Identity, 0.0}; }
    static Activation relu() { return {ActivationKind::Relu, 0.0}; }
    static Activation leaky_relu(double eta) { return {ActivationKind::LeakyRelu, eta}; }
    static Activation abs() { return {ActivationKind::Abs, 0.0}; }
};

std::string to_string(ActivationKind kind);
ActivationKind activation_kind_from_string(const std::string& name);

struct Layer {
    Mat weight;  // D^l x D^{l-1}
    Vec bias;    // D^l
    Activation activation;
};

/// Per-hidden-layer sign pattern of the pre-activations; identifies a region.
struct ActivationCode {
    std::vector<std::vector<std::int8_t>> signs;

    auto operator<=>(const ActivationCode&) const = default;
    bool operator==(const ActivationCode&) const = default;

    std::size_t total_units() const noexcept;
    /// Compact "+-|+-+" rendering, one group per hidden layer.
    std::string str() const;
};

struct ActivationCodeHash {
    std::size_t operator()(const ActivationCode& code) const noexcept;
};

struct AffineMap {
    Mat slope;   // D x S
    Vec offset;  // D

    Vec apply(const Vec& z) const { return slope * z + offset; }
};

/// Continuous piecewise-affine generator g: R^S -> R^D. Immutable once built.
class GenerativeNetwork {
public:
    enum class DegeneratePolicy { Reject, Allow };

    /// Validates dimension chaining, finiteness, identity output activation
    /// and eta in (0,1). Hidden units whose weight row is identically zero
    /// are rejected unless `policy` is Allow, in which case they are flagged.
    explicit GenerativeNetwork(std::vector<Layer> layers,
                               DegeneratePolicy policy = DegeneratePolicy::Reject);

    int latent_dim() const noexcept { return static_cast<int>(layers_.front().weight.cols()); }
    int output_dim() const noexcept { return static_cast<int>(layers_.back().weight.rows()); }
    /// Number of affine layers L (the last one has no activation).
    int depth() const noexcept { return static_cast<int>(layers_.size()); }
    int hidden_layers() const noexcept { return depth() - 1; }
    /// Output width D^l of layer l (1-based); width(0) is the latent dimension.
    int width(int l) const;
    int hidden_units() const noexcept;

    /// Layer l, 1-based to match the usual W^l, v^l indexing.
    const Layer& layer(int l) const;
    const std::vector<Layer>& layers() const noexcept { return layers_; }

    bool has_degenerate_units() const noexcept { return degenerate_; }

    GenerativeNetwork with_weight(int l, const Mat& w) const;
    GenerativeNetwork with_bias(int l, const Vec& v) const;

private:
    std::vector<Layer> layers_;
    bool degenerate_ = false;
    DegeneratePolicy policy_ = DegeneratePolicy::Reject;
};

/// Gaussian latent prior and observation noise, both SPD.
class NoiseModel {
public:
    NoiseModel(const Mat& sigma_x, const Mat& sigma_z);
    static NoiseModel isotropic(int output_dim, double var_x, int latent_dim, double var_z = 1.0);

    const SpdMatrix& sigma_x() const noexcept { return sigma_x_; }
    const SpdMatrix& sigma_z() const noexcept { return sigma_z_; }

private:
    SpdMatrix sigma_x_;
    SpdMatrix sigma_z_;
};

Vec forward(const GenerativeNetwork& net, const Vec& z);

/// Sign of every hidden pre-activation; sign(0) counts as +1.
ActivationCode activation_code(const GenerativeNetwork& net, const Vec& z);

bool code_matches(const GenerativeNetwork& net, const ActivationCode& code) noexcept;

/// Diagonal of D^l for hidden layer l (1-based); all ones for l = L.
Vec activation_diagonal(const GenerativeNetwork& net, const ActivationCode& code, int l);

/// (A_w, b_w) with g(z) = A_w z + b_w on the region named by `code`.
AffineMap per_region_affine(const GenerativeNetwork& net, const ActivationCode& code);

/// Up-to-layer-l map: h^l(z) = A^{1->l} z + b^{1->l} for z in the region.
std::pair<Mat, Vec> partial_affine(const GenerativeNetwork& net, const ActivationCode& code, int l);

/// Back-propagation matrix A^{l+1->L} = W^L D^{L-1} ... D^{l+1} W^{l+1}
/// (D x D^l), the identity for l = L.
Mat backprop_affine(const GenerativeNetwork& net, const ActivationCode& code, int l);

/// Input of layer l as an affine function of z on the region:
/// D^{l-1}(A^{1->l-1} z + b^{1->l-1}), which is (I, 0) for l = 1.
std::pair<Mat, Vec> layer_input_affine(const GenerativeNetwork& net, const ActivationCode& code, int l);

}  // namespace cpaem

#pragma once

#include "cpaem/network.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace cpaem {

/// Model document: the network plus, optionally, its noise model.
///
///   {"latent_dim": S,
///    "layers": [{"weight": [[...]], "bias": [...],
///                "activation": "relu"|"leaky_relu"|"abs"|"identity",
///                "eta": 0.2}],
///    "noise": {"sigma_x": [[...]], "sigma_z": [[...]]}}      (optional)
///
/// Doubles are written in shortest round-trip form, so reading back a written
/// document reproduces every parameter bit for bit.
struct ModelDocument {
    GenerativeNetwork net;
    std::optional<NoiseModel> noise;
};

nlohmann::json network_to_json(const GenerativeNetwork& net);
GenerativeNetwork network_from_json(const nlohmann::json& doc);

nlohmann::json model_to_json(const GenerativeNetwork& net, const std::optional<NoiseModel>& noise);
ModelDocument model_from_json(const nlohmann::json& doc);

nlohmann::json matrix_to_json(const Mat& m);
Mat matrix_from_json(const nlohmann::json& j, const std::string& what);
nlohmann::json vector_to_json(const Vec& v);
Vec vector_from_json(const nlohmann::json& j, const std::string& what);

ModelDocument load_model(const std::string& path);
void save_model(const std::string& path, const GenerativeNetwork& net,
                const std::optional<NoiseModel>& noise);

}  // namespace cpaem

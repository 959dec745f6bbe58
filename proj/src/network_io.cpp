#include "cpaem/network_io.hpp"

#include "cpaem/errors.hpp"

#include <fstream>

namespace cpaem {

using nlohmann::json;

json matrix_to_json(const Mat& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat matrix_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw InputError(what + ": expected a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (!j[0].is_array() || j[0].empty()) throw InputError(what + ": rows must be non-empty arrays");
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw InputError(what + ": ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c) {
            const json& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) throw InputError(what + ": non-numeric entry");
            m(r, c) = v.get<double>();
        }
    }
    return m;
}

json vector_to_json(const Vec& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Vec vector_from_json(const json& j, const std::string& what) {
    if (!j.is_array()) throw InputError(what + ": expected an array");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw InputError(what + ": non-numeric entry");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

json network_to_json(const GenerativeNetwork& net) {
    json layers = json::array();
    for (const Layer& layer : net.layers()) {
        json l{{"weight", matrix_to_json(layer.weight)},
               {"bias", vector_to_json(layer.bias)},
               {"activation", to_string(layer.activation.kind)}};
        if (layer.activation.kind == ActivationKind::LeakyRelu) l["eta"] = layer.activation.eta;
        layers.push_back(std::move(l));
    }
    return json{{"latent_dim", net.latent_dim()}, {"layers", std::move(layers)}};
}

GenerativeNetwork network_from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("layers") || !doc["layers"].is_array())
        throw InputError("model document needs a 'layers' array");
    std::vector<Layer> layers;
    for (std::size_t i = 0; i < doc["layers"].size(); ++i) {
        const json& l = doc["layers"][i];
        const std::string where = "layers[" + std::to_string(i) + "]";
        if (!l.contains("weight") || !l.contains("bias")) throw InputError(where + ": needs weight and bias");
        Layer layer;
        layer.weight = matrix_from_json(l["weight"], where + ".weight");
        layer.bias = vector_from_json(l["bias"], where + ".bias");
        layer.activation.kind = activation_kind_from_string(l.value("activation", std::string("identity")));
        if (layer.activation.kind == ActivationKind::LeakyRelu) {
            if (!l.contains("eta")) throw InputError(where + ": leaky_relu needs 'eta'");
            layer.activation.eta = l["eta"].get<double>();
        }
        layers.push_back(std::move(layer));
    }
    GenerativeNetwork net(std::move(layers));
    if (doc.contains("latent_dim") && doc["latent_dim"].get<int>() != net.latent_dim())
        throw InputError("latent_dim does not match the first layer's weight columns");
    return net;
}

json model_to_json(const GenerativeNetwork& net, const std::optional<NoiseModel>& noise) {
    json doc = network_to_json(net);
    if (noise) {
        doc["noise"] = json{{"sigma_x", matrix_to_json(noise->sigma_x().matrix())},
                            {"sigma_z", matrix_to_json(noise->sigma_z().matrix())}};
    }
    return doc;
}

ModelDocument model_from_json(const json& doc) {
    ModelDocument out{network_from_json(doc), std::nullopt};
    if (doc.contains("noise")) {
        const json& n = doc["noise"];
        out.noise.emplace(matrix_from_json(n.at("sigma_x"), "noise.sigma_x"),
                          matrix_from_json(n.at("sigma_z"), "noise.sigma_z"));
        if (out.noise->sigma_x().dim() != out.net.output_dim() ||
            out.noise->sigma_z().dim() != out.net.latent_dim())
            throw InputError("noise covariances do not match the network dimensions");
    }
    return out;
}

ModelDocument load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open model file '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw InputError("model file '" + path + "' is not valid JSON: " + e.what());
    }
    return model_from_json(doc);
}

void save_model(const std::string& path, const GenerativeNetwork& net,
                const std::optional<NoiseModel>& noise) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write model file '" + path + "'");
    out << model_to_json(net, noise).dump(2) << '\n';
}

}  // namespace cpaem

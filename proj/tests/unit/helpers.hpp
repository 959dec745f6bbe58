#pragma once

#include "cpaem/datasets.hpp"
#include "cpaem/network.hpp"

#include <vector>

namespace testnets {

using cpaem::Activation;
using cpaem::GenerativeNetwork;
using cpaem::Layer;
using cpaem::Mat;
using cpaem::Vec;

inline Mat m(std::initializer_list<std::initializer_list<double>> rows) {
    Mat out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index r = 0;
    for (const auto& row : rows) {
        Eigen::Index c = 0;
        for (double v : row) out(r, c++) = v;
        ++r;
    }
    return out;
}

inline Vec v(std::initializer_list<double> xs) {
    Vec out(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) out[i++] = x;
    return out;
}

// g(z) = relu(z) + relu(-z) = |z|, one knot at 0
inline GenerativeNetwork knot_net(Activation act = Activation::relu()) {
    return GenerativeNetwork({Layer{m({{1.0}, {-1.0}}), v({0.0, 0.0}), act},
                              Layer{m({{1.0, 1.0}}), v({0.0}), Activation::identity()}});
}

inline GenerativeNetwork linear_net(const Mat& w, const Vec& b) {
    return GenerativeNetwork({Layer{w, b, Activation::identity()}});
}

inline GenerativeNetwork random_net(const char* spec, std::uint64_t seed) {
    return cpaem::random_network(cpaem::parse_net_spec(spec), seed);
}

}  // namespace testnets

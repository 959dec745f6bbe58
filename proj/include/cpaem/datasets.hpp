#pragma once

#include "cpaem/network.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cpaem {

/// Points on the unit circle (uniform angle) plus N(0, noise_sd^2 I).
std::vector<Vec> circle_dataset(std::size_t n, double noise_sd, std::uint64_t seed);

/// x1 ~ U(-half_width, half_width), x2 = amplitude sin(frequency x1) + N(0, noise_sd^2).
struct WaveParams {
    double amplitude = 1.0;
    double frequency = 2.0;
    double half_width = 3.14159265358979323846;
    double noise_sd = 0.05;
};
std::vector<Vec> wave_dataset(std::size_t n, const WaveParams& params, std::uint64_t seed);

/// z ~ N(0, Sz), x = g(z) + N(0, Sx).
std::vector<Vec> model_dataset(std::size_t n, const GenerativeNetwork& net, const NoiseModel& noise,
                               std::uint64_t seed);

struct NetSpec {
    std::vector<int> dims;  // S, hidden widths..., D
    Activation activation;
};

/// "1-8-2 relu", "1-4-4-2 leaky_relu:0.2", "2-6-3 abs".
NetSpec parse_net_spec(const std::string& spec);

/// Weights N(0, 1/fan_in), biases N(0, 0.1^2); identity output layer.
GenerativeNetwork random_network(const NetSpec& spec, std::uint64_t seed);

}  // namespace cpaem

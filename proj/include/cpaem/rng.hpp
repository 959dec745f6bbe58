#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace cpaem {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A draw is a
/// pure function of (key, counter), so any sample can be regenerated from its
/// index alone, independent of how work is split across threads.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Uniform double in the open interval (0, 1) from 64 random bits.
double to_open_unit(std::uint64_t bits) noexcept;

/// Standard normals for sample `index` of stream `stream` under `seed`.
/// Fills `out` completely; identical arguments give identical values.
void counter_normals(std::uint64_t seed, std::uint32_t stream, std::uint64_t index,
                     std::span<double> out) noexcept;

/// Uniforms in (0,1) for sample `index`, same addressing as counter_normals.
void counter_uniforms(std::uint64_t seed, std::uint32_t stream, std::uint64_t index,
                      std::span<double> out) noexcept;

/// Sequential convenience wrapper over the counter generator.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint32_t stream = 0) noexcept
        : seed_(seed), stream_(stream) {}

    double uniform() noexcept;
    double normal() noexcept;
    double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

    std::uint64_t seed() const noexcept { return seed_; }

private:
    std::uint64_t seed_;
    std::uint32_t stream_;
    std::uint64_t next_ = 0;
};

}  // namespace cpaem

#include "cpaem/rng.hpp"

#include <cmath>
#include <numbers>

namespace cpaem {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

std::array<std::uint32_t, 2> key_of(std::uint64_t seed) noexcept {
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

std::array<std::uint32_t, 4> block(std::uint64_t seed, std::uint32_t stream, std::uint64_t index,
                                   std::uint32_t j) noexcept {
    return philox4x32({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                       stream, j},
                      key_of(seed));
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) noexcept {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, c[0], hi0, lo0);
        mulhilo(kMul1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kWeyl0;
        k[1] += kWeyl1;
    }
    return c;
}

double to_open_unit(std::uint64_t bits) noexcept {
    // 53 significant bits, shifted by half an ulp so 0 and 1 are excluded.
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

void counter_uniforms(std::uint64_t seed, std::uint32_t stream, std::uint64_t index,
                      std::span<double> out) noexcept {
    std::size_t filled = 0;
    for (std::uint32_t j = 0; filled < out.size(); ++j) {
        const auto r = block(seed, stream, index, j);
        const std::uint64_t a = (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
        const std::uint64_t b = (static_cast<std::uint64_t>(r[2]) << 32) | r[3];
        out[filled++] = to_open_unit(a);
        if (filled < out.size()) out[filled++] = to_open_unit(b);
    }
}

void counter_normals(std::uint64_t seed, std::uint32_t stream, std::uint64_t index,
                     std::span<double> out) noexcept {
    std::size_t filled = 0;
    for (std::uint32_t j = 0; filled < out.size(); ++j) {
        const auto r = block(seed, stream, index, j);
        const double u1 = to_open_unit((static_cast<std::uint64_t>(r[0]) << 32) | r[1]);
        const double u2 = to_open_unit((static_cast<std::uint64_t>(r[2]) << 32) | r[3]);
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * std::numbers::pi * u2;
        out[filled++] = rad * std::cos(ang);
        if (filled < out.size()) out[filled++] = rad * std::sin(ang);
    }
}

double Rng::uniform() noexcept {
    double u;
    counter_uniforms(seed_, stream_, next_++, std::span<double>(&u, 1));
    return u;
}

double Rng::normal() noexcept {
    double z;
    counter_normals(seed_, stream_, next_++, std::span<double>(&z, 1));
    return z;
}

}  // namespace cpaem

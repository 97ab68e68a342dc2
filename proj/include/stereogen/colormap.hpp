#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

namespace stereogen {

/// Viridis colormap sampled at t in [0, 1], linearly interpolated between
/// the standard octile anchors. Perceptually ordered: luminance increases
/// monotonically with t.
inline std::array<std::uint8_t, 3> viridis_u8(double t) {
    static constexpr std::array<std::array<double, 3>, 9> kAnchors{{
        {68.0, 1.0, 84.0},
        {72.0, 40.0, 120.0},
        {62.0, 73.0, 137.0},
        {49.0, 104.0, 142.0},
        {33.0, 145.0, 140.0},
        {31.0, 158.0, 137.0},
        {53.0, 183.0, 121.0},
        {110.0, 206.0, 88.0},
        {253.0, 231.0, 37.0},
    }};
    t = std::clamp(t, 0.0, 1.0);
    const double pos = t * (kAnchors.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const std::size_t j = std::min(i + 1, kAnchors.size() - 1);
    const double frac = pos - static_cast<double>(i);
    std::array<std::uint8_t, 3> out{};
    for (int c = 0; c < 3; ++c) {
        const double v = kAnchors[i][c] + (kAnchors[j][c] - kAnchors[i][c]) * frac;
        out[c] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
    return out;
}

}  // namespace stereogen

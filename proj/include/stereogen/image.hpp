#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "stereogen/common.hpp"

namespace stereogen {

/// Per-pixel scalar raster with a validity mask. Values are kept in double
/// precision in memory; file formats (PFM) narrow to float32 at the boundary.
struct FloatGrid {
    int width = 0;
    int height = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> valid;

    FloatGrid() = default;
    FloatGrid(int w, int h, double value = 0.0, bool is_valid = false)
        : width(w),
          height(h),
          values(static_cast<std::size_t>(w) * h, value),
          valid(static_cast<std::size_t>(w) * h, is_valid ? 1 : 0) {}

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    std::size_t size() const { return values.size(); }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }

    double at(int x, int y) const { return values[index(x, y)]; }
    bool is_valid(int x, int y) const { return valid[index(x, y)] != 0; }

    void set(int x, int y, double v) {
        values[index(x, y)] = v;
        valid[index(x, y)] = 1;
    }
    void invalidate(int x, int y) {
        values[index(x, y)] = 0.0;
        valid[index(x, y)] = 0;
    }

    std::size_t valid_count() const {
        std::size_t n = 0;
        for (std::uint8_t v : valid) {
            n += v != 0;
        }
        return n;
    }
};

using DepthMap = FloatGrid;
using DisparityMap = FloatGrid;
using AlphaMap = FloatGrid;
using ObservabilityMap = FloatGrid;

/// Binary per-pixel mask; entries are 0 or 1.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(int w, int h, bool value = false)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, value ? 1 : 0) {}

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
    bool at(int x, int y) const { return data[index(x, y)] != 0; }
    void set(int x, int y, bool v) { data[index(x, y)] = v ? 1 : 0; }

    std::size_t count() const {
        std::size_t n = 0;
        for (std::uint8_t v : data) {
            n += v != 0;
        }
        return n;
    }
};

/// RGB raster, channels interleaved, values in [0, 1].
struct ColorImage {
    int width = 0;
    int height = 0;
    std::vector<float> rgb;

    ColorImage() = default;
    ColorImage(int w, int h)
        : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0.0f) {}

    std::size_t index(int x, int y) const { return (static_cast<std::size_t>(y) * width + x) * 3; }

    void set(int x, int y, float r, float g, float b) {
        const std::size_t i = index(x, y);
        rgb[i] = r;
        rgb[i + 1] = g;
        rgb[i + 2] = b;
    }
};

}  // namespace stereogen

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "stereogen/common.hpp"
#include "stereogen/image.hpp"

namespace stereogen {

// PFM, grayscale variant: "Pf\n<width> <height>\n<scale>\n" followed by
// float32 rows stored bottom-to-top. A negative scale marks little-endian
// data. Values narrow to float32; invalid pixels are written as 0 (the
// format has no native invalid encoding; see the sidecar validity mask).

inline void write_pfm(const std::filesystem::path& path, const FloatGrid& grid) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << "Pf\n" << grid.width << " " << grid.height << "\n" << "-1.0\n";
    std::vector<float> row(grid.width);
    for (int y = grid.height - 1; y >= 0; --y) {
        for (int x = 0; x < grid.width; ++x) {
            const std::size_t i = grid.index(x, y);
            row[x] = grid.valid[i] ? static_cast<float>(grid.values[i]) : 0.0f;
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

inline FloatGrid read_pfm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string magic;
    in >> magic;
    if (magic == "PF") {
        throw ParseError("3-channel PFM is not supported: " + path.string());
    }
    if (magic != "Pf") {
        throw ParseError("not a PFM file: " + path.string());
    }
    int width = 0, height = 0;
    double scale = 0.0;
    if (!(in >> width >> height >> scale) || width <= 0 || height <= 0 || scale == 0.0) {
        throw ParseError("malformed PFM header in " + path.string());
    }
    in.get();  // single whitespace separating header and data
    const bool little_endian = scale < 0.0;

    FloatGrid grid(width, height);
    std::vector<float> row(width);
    for (int y = height - 1; y >= 0; --y) {
        if (!in.read(reinterpret_cast<char*>(row.data()),
                     static_cast<std::streamsize>(row.size() * sizeof(float)))) {
            throw ParseError("truncated PFM body in " + path.string());
        }
        for (int x = 0; x < width; ++x) {
            float v = row[x];
            if (!little_endian) {
                std::uint32_t bits;
                std::memcpy(&bits, &v, 4);
                bits = __builtin_bswap32(bits);
                std::memcpy(&v, &bits, 4);
            }
            const std::size_t i = grid.index(x, y);
            grid.values[i] = v;
            grid.valid[i] = std::isfinite(v) ? 1 : 0;
        }
    }
    return grid;
}

}  // namespace stereogen

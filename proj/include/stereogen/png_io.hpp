#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <vector>

#include "stereogen/common.hpp"
#include "stereogen/image.hpp"

namespace stereogen {

/// Decoded PNG: pixel samples widened to 16 bits, interleaved channels.
struct PngImage {
    int width = 0;
    int height = 0;
    int channels = 0;   // 1 (gray) or 3 (rgb)
    int bit_depth = 0;  // 8 or 16
    std::vector<std::uint16_t> pixels;
};

namespace detail {

struct FileHandle {
    std::FILE* fp = nullptr;
    explicit FileHandle(const std::filesystem::path& path, const char* mode)
        : fp(std::fopen(path.string().c_str(), mode)) {}
    ~FileHandle() {
        if (fp) {
            std::fclose(fp);
        }
    }
    FileHandle(const FileHandle&) = delete;
    FileHandle& operator=(const FileHandle&) = delete;
};

}  // namespace detail

inline PngImage read_png(const std::filesystem::path& path) {
    detail::FileHandle file(path, "rb");
    if (!file.fp) {
        throw IoError("cannot open " + path.string());
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError("failed to decode PNG " + path.string());
    }
    png_init_io(png, file.fp);
    png_read_info(png, info);

    const int color_type = png_get_color_type(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) {
        png_set_tRNS_to_alpha(png);
    }
    if (color_type & PNG_COLOR_MASK_ALPHA) {
        png_set_strip_alpha(png);
    }
    if (png_get_bit_depth(png, info) == 16) {
        png_set_swap(png);  // PNG is big-endian on the wire
    }
    png_read_update_info(png, info);

    PngImage image;
    image.width = static_cast<int>(png_get_image_width(png, info));
    image.height = static_cast<int>(png_get_image_height(png, info));
    image.channels = png_get_channels(png, info);
    image.bit_depth = png_get_bit_depth(png, info);
    if (image.channels != 1 && image.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError("unsupported channel count in " + path.string());
    }

    const std::size_t samples_per_row =
        static_cast<std::size_t>(image.width) * image.channels;
    const std::size_t bytes_per_row = samples_per_row * (image.bit_depth / 8);
    std::vector<std::uint8_t> raw(bytes_per_row * image.height);
    std::vector<png_bytep> rows(image.height);
    for (int y = 0; y < image.height; ++y) {
        rows[y] = raw.data() + static_cast<std::size_t>(y) * bytes_per_row;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    image.pixels.resize(samples_per_row * image.height);
    if (image.bit_depth == 16) {
        std::memcpy(image.pixels.data(), raw.data(), raw.size());
    } else {
        for (std::size_t i = 0; i < image.pixels.size(); ++i) {
            image.pixels[i] = raw[i];
        }
    }
    return image;
}

namespace detail {

inline void write_png(const std::filesystem::path& path, int width, int height, int channels,
                      int bit_depth, const std::uint8_t* bytes) {
    FileHandle file(path, "wb");
    if (!file.fp) {
        throw IoError("cannot write " + path.string());
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode PNG " + path.string());
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) {
        png_set_swap(png);
    }
    const std::size_t bytes_per_row =
        static_cast<std::size_t>(width) * channels * (bit_depth / 8);
    std::vector<png_bytep> rows(height);
    for (int y = 0; y < height; ++y) {
        rows[y] = const_cast<png_bytep>(bytes + static_cast<std::size_t>(y) * bytes_per_row);
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace detail

/// 8-bit RGB from floats in [0, 1].
inline void write_color_png(const std::filesystem::path& path, const ColorImage& image) {
    std::vector<std::uint8_t> bytes(image.rgb.size());
    for (std::size_t i = 0; i < image.rgb.size(); ++i) {
        bytes[i] = static_cast<std::uint8_t>(
            std::lround(std::clamp(image.rgb[i], 0.0f, 1.0f) * 255.0f));
    }
    detail::write_png(path, image.width, image.height, 3, 8, bytes.data());
}

inline ColorImage read_color_png(const std::filesystem::path& path) {
    const PngImage png = read_png(path);
    if (png.channels != 3) {
        throw ParseError("expected RGB PNG: " + path.string());
    }
    ColorImage image(png.width, png.height);
    const double max = png.bit_depth == 16 ? 65535.0 : 255.0;
    for (std::size_t i = 0; i < image.rgb.size(); ++i) {
        image.rgb[i] = static_cast<float>(png.pixels[i] / max);
    }
    return image;
}

/// 8-bit grayscale mask: 255 = set, 0 = clear.
inline void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
    std::vector<std::uint8_t> bytes(mask.data.size());
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
        bytes[i] = mask.data[i] ? 255 : 0;
    }
    detail::write_png(path, mask.width, mask.height, 1, 8, bytes.data());
}

inline Mask read_mask_png(const std::filesystem::path& path) {
    const PngImage png = read_png(path);
    if (png.channels != 1) {
        throw ParseError("expected grayscale PNG: " + path.string());
    }
    const int threshold = png.bit_depth == 16 ? 32768 : 128;
    Mask mask(png.width, png.height);
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
        mask.data[i] = png.pixels[i] >= threshold ? 1 : 0;
    }
    return mask;
}

/// 16-bit disparity PNG, KITTI convention: stored value = round(d * 256),
/// 0 marks invalid.
inline void write_disparity_png16(const std::filesystem::path& path, const DisparityMap& disp) {
    std::vector<std::uint16_t> samples(disp.size(), 0);
    for (std::size_t i = 0; i < disp.size(); ++i) {
        if (disp.valid[i]) {
            const double scaled = std::lround(disp.values[i] * 256.0);
            samples[i] = static_cast<std::uint16_t>(std::clamp(scaled, 0.0, 65535.0));
        }
    }
    detail::write_png(path, disp.width, disp.height, 1, 16,
                      reinterpret_cast<const std::uint8_t*>(samples.data()));
}

inline DisparityMap read_disparity_png16(const std::filesystem::path& path) {
    const PngImage png = read_png(path);
    if (png.channels != 1) {
        throw ParseError("expected grayscale disparity PNG: " + path.string());
    }
    DisparityMap disp(png.width, png.height);
    for (std::size_t i = 0; i < disp.size(); ++i) {
        if (png.pixels[i] != 0) {
            disp.values[i] = png.pixels[i] / 256.0;
            disp.valid[i] = 1;
        }
    }
    return disp;
}

}  // namespace stereogen

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "bridgevae/error.hpp"

namespace bvae::data {

/// Single-channel image, row-major, values in [0, 1] (0 black, 1 white).
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(std::size_t w, std::size_t h, float fill = 0.0f) : width(w), height(h), pixels(w * h, fill) {}

    float& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
    float at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }

    bool operator==(const Image&) const = default;
};

/// Encodes as 8-bit grayscale PNG; values are clamped and rounded to v*255.
std::string encode_png(const Image& image);
Image decode_png(const std::string& bytes);

void write_png(const Image& image, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

/// Averages non-overlapping factor x factor blocks.
Image downsample(const Image& image, std::size_t factor);

std::size_t count_above(const Image& image, float threshold);

}  // namespace bvae::data

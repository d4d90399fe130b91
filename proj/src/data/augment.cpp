#include "bridgevae/data/augment.hpp"

#include <cmath>
#include <numbers>

namespace bvae::data {

std::vector<AugmentParams> augmentation_grid() {
    std::vector<AugmentParams> grid;
    grid.reserve(kRotationsDeg.size() * kScaleSteps * kScaleSteps);
    for (double rot : kRotationsDeg)
        for (std::size_t h = 0; h < kScaleSteps; ++h)
            for (std::size_t v = 0; v < kScaleSteps; ++v)
                grid.push_back({rot, 1.0 + 0.05 * static_cast<double>(h) / (kScaleSteps - 1),
                                1.0 + 0.10 * static_cast<double>(v) / (kScaleSteps - 1)});
    return grid;
}

Image augment(const Image& image, const AugmentParams& p) {
    if (!(p.hscale > 0.0) || !(p.vscale > 0.0)) throw InvalidArgument("augment: scales must be positive");
    const double theta = p.rotation_deg * std::numbers::pi / 180.0;
    const double c = std::cos(theta), s = std::sin(theta);
    const double cx = static_cast<double>(image.width) / 2.0;
    const double cy = static_cast<double>(image.height) / 2.0;
    const auto w = static_cast<std::ptrdiff_t>(image.width);
    const auto h = static_cast<std::ptrdiff_t>(image.height);
    const auto sample = [&](std::ptrdiff_t x, std::ptrdiff_t y) -> double {
        return (x < 0 || y < 0 || x >= w || y >= h) ? 0.0 : image.pixels[static_cast<std::size_t>(y * w + x)];
    };

    Image out(image.width, image.height);
    for (std::size_t oy = 0; oy < image.height; ++oy) {
        for (std::size_t ox = 0; ox < image.width; ++ox) {
            // Inverse map of out = center + S * R * (in - center), pixel centers at +0.5.
            const double qx = (static_cast<double>(ox) + 0.5 - cx) / p.hscale;
            const double qy = (static_cast<double>(oy) + 0.5 - cy) / p.vscale;
            const double sx = cx + c * qx - s * qy - 0.5;
            const double sy = cy + s * qx + c * qy - 0.5;
            const double fx = std::floor(sx), fy = std::floor(sy);
            const double ax = sx - fx, ay = sy - fy;
            const auto x0 = static_cast<std::ptrdiff_t>(fx), y0 = static_cast<std::ptrdiff_t>(fy);
            const double v = (1.0 - ay) * ((1.0 - ax) * sample(x0, y0) + ax * sample(x0 + 1, y0)) +
                             ay * ((1.0 - ax) * sample(x0, y0 + 1) + ax * sample(x0 + 1, y0 + 1));
            out.at(ox, oy) = static_cast<float>(v);
        }
    }
    return out;
}

}  // namespace bvae::data

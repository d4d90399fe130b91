#pragma once

#include <array>
#include <vector>

#include "bridgevae/data/image.hpp"

namespace bvae::data {

struct AugmentParams {
    double rotation_deg = 0.0;
    double hscale = 1.0;
    double vscale = 1.0;

    bool operator==(const AugmentParams&) const = default;
};

inline constexpr std::array<double, 3> kRotationsDeg{-0.3, 0.0, 0.3};
inline constexpr std::size_t kScaleSteps = 5;

/// The 3 x 5 x 5 grid: rotation outermost, then horizontal, then vertical scale.
std::vector<AugmentParams> augmentation_grid();

/// Rotates about the image center (positive = counter-clockwise on screen),
/// then scales horizontally and vertically about the center. Bilinear
/// sampling, zero fill outside the source, same output size, no translation.
Image augment(const Image& image, const AugmentParams& p);

}  // namespace bvae::data

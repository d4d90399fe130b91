#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bridgevae/core/layers.hpp"

namespace bvae::model {

/// Architecture knobs. Every conv stage halves both spatial axes, so image
/// height and width must be divisible by 2^stages.
struct ArchitectureProfile {
    std::string name = "full";
    std::size_t height = 128;
    std::size_t width = 512;
    std::size_t latent_dim = 8;
    std::vector<std::size_t> channels{64, 128, 128, 128, 128};
    std::size_t kernel = 3;
    std::size_t stride = 2;
    double dropout_rate = 0.25;
    core::BatchNormConfig batch_norm{};

    static ArchitectureProfile full();
    /// Half-resolution variant (64 x 256) used for quick training runs.
    static ArchitectureProfile desk();
    static ArchitectureProfile by_name(const std::string& name);

    std::size_t downsample() const;
    std::size_t bottleneck_height() const { return height / downsample(); }
    std::size_t bottleneck_width() const { return width / downsample(); }
    std::size_t flat_features() const {
        return bottleneck_height() * bottleneck_width() * channels.back();
    }

    /// Throws InvalidArgument when the profile cannot be built.
    void validate() const;

    bool operator==(const ArchitectureProfile&) const;
};

void to_json(nlohmann::json& j, const ArchitectureProfile& p);
void from_json(const nlohmann::json& j, ArchitectureProfile& p);

}  // namespace bvae::model

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "bridgevae/lab/latent_lab.hpp"
#include "bridgevae/model/checkpoint.hpp"

namespace bvae::app {

/// A loaded checkpoint plus its optional centroid table. Immutable after load.
struct Session {
    model::ArchitectureProfile profile;
    std::string checkpoint_id;
    model::Vae<float> model;
    std::optional<lab::CentroidTable> centroids;

    /// Reads the checkpoint; the centroid table comes from `centroids_path`
    /// or, when absent, from centroids.json next to the checkpoint if present.
    static Session load(const std::filesystem::path& checkpoint_path,
                        const std::optional<std::filesystem::path>& centroids_path = std::nullopt);

    /// Centroid for a subtype name. Throws InvalidArgument when unknown.
    lab::LatentVec centroid(const std::string& subtype) const;
};

/// Decodes z and PNG-encodes the image. The CLI and the HTTP service both
/// go through this, so identical inputs give identical bytes.
std::string decode_to_png(const model::Vae<float>& model, const lab::LatentVec& z);

/// Resizes an arbitrary-size grayscale image to the profile's input size by
/// integer box downsampling. Throws ShapeError when that is impossible.
data::Image fit_to_profile(const data::Image& image, const model::ArchitectureProfile& profile);

}  // namespace bvae::app

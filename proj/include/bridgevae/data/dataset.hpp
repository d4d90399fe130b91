#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bridgevae/core/tensor.hpp"
#include "bridgevae/data/augment.hpp"
#include "bridgevae/data/bridge.hpp"

namespace bvae::data {

inline constexpr const char* kRendererVersion = "procedural-2d/1";
inline constexpr std::size_t kImagesPerSubtype = 1200;

struct ManifestEntry {
    std::string path;  // relative to the manifest directory
    int label = 0;
    std::string subtype;
    int frame = 0;
    AugmentParams augment{};

    bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
    std::map<std::string, int> label_dictionary;
    std::uint64_t seed = 0;
    std::string renderer_version;
    std::vector<ManifestEntry> entries;
    std::filesystem::path root;  // directory holding manifest.json; not serialized

    bool operator==(const DatasetManifest& o) const {
        return label_dictionary == o.label_dictionary && seed == o.seed &&
               renderer_version == o.renderer_version && entries == o.entries;
    }
};

/// "<subtype>/<frame>_<rot>_<hs>_<vs>.png", e.g. "Beam Three_span/03_-0.3_1.0125_1.050.png".
std::string entry_path(Subtype s, int frame, const AugmentParams& p);

/// Every (subtype, frame, augmentation) entry in canonical order.
DatasetManifest plan_dataset(std::uint64_t seed);

struct BuildOptions {
    std::size_t threads = 1;
    std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Renders, augments and writes all 9600 PNGs plus manifest.json under out_dir.
/// The generator has no stochastic step; the seed is recorded for provenance.
DatasetManifest build_dataset(const std::filesystem::path& out_dir, std::uint64_t seed,
                              const BuildOptions& options = {});

void write_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

struct LoadedDataset {
    core::Tensor<float> images;  // N x H x W x 1
    std::vector<int> labels;
};

/// Loads the selected entries (all when `indices` is empty) in the given
/// order, box-downsampling by `downsample_factor`.
LoadedDataset load_dataset(const DatasetManifest& manifest, const std::vector<std::size_t>& indices = {},
                           std::size_t downsample_factor = 1);

/// Packs images into an N x H x W x 1 tensor.
core::Tensor<float> stack_images(const std::vector<Image>& images);
Image image_from_tensor(const core::Tensor<float>& batch, std::size_t index);

/// Worker count from BRIDGEVAE_THREADS (default 1, capped by hardware).
std::size_t configured_threads();

struct SubsetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> holdout;
};

/// Draws disjoint per-class training and held-out entry indices for the
/// given labels (shuffled with Rng(seed) per label, then sorted).
SubsetSplit split_entries(const DatasetManifest& manifest, const std::vector<int>& labels,
                          std::size_t train_per_class, std::size_t holdout_per_class, std::uint64_t seed);

}  // namespace bvae::data

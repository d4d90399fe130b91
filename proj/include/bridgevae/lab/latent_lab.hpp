#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bridgevae/data/image.hpp"
#include "bridgevae/model/vae.hpp"

namespace bvae::lab {

using LatentVec = std::vector<double>;

struct EmbeddingRow {
    std::size_t sample_id = 0;
    int label = 0;
    LatentVec z;  // inference-mode z_mean

    bool operator==(const EmbeddingRow&) const = default;
};

struct EmbeddingTable {
    std::string checkpoint_id;
    std::size_t latent_dim = 0;
    std::vector<EmbeddingRow> rows;

    bool operator==(const EmbeddingTable&) const = default;
};

/// Encodes one image at a time so results never depend on batch composition.
EmbeddingTable embed_dataset(const model::Vae<float>& model, const core::Tensor<float>& images,
                             const std::vector<int>& labels, std::string checkpoint_id = {});

/// Decodes each latent vector on its own (same reason as above).
std::vector<data::Image> decode_points(const model::Vae<float>& model, const std::vector<LatentVec>& points);
data::Image decode_point(const model::Vae<float>& model, const LatentVec& z);

/// Per-label arithmetic mean of z. Labels in `required` must have rows;
/// with `required` empty, every label present in the table is used.
std::map<int, LatentVec> centroids(const EmbeddingTable& table, const std::vector<int>& required = {});

struct MorphTrack {
    LatentVec a;
    LatentVec b;
    std::size_t steps = 0;
    std::vector<LatentVec> points;
    std::vector<data::Image> frames;
};

/// Points (1-t)a + t b at t = k/(steps-1), each decoded.
std::vector<LatentVec> interpolate(const LatentVec& a, const LatentVec& b, std::size_t steps);
MorphTrack morph(const model::Vae<float>& model, const LatentVec& a, const LatentVec& b, std::size_t steps);

inline constexpr std::size_t kDefaultMorphSteps = 11;

/// The 28 unordered pairs of distinct labels from 0..7.
std::vector<std::pair<int, int>> subtype_pairs(int label_count = 8);

/// All 2^dim sign corners at +-magnitude. Point i takes +magnitude on
/// dimension d when bit (dim-1-d) of i is set, so the first point is all
/// negative and the last all positive.
std::vector<LatentVec> boundary_grid(double magnitude, std::size_t latent_dim = 8);

inline constexpr float kSeparatorValue = 0.5f;

/// Row-major grid. Each cell is (W + border) x (H + border) with the image at
/// the cell's top-left and separator pixels along its right and bottom edges.
/// Unused cells stay black.
data::Image montage(const std::vector<data::Image>& images, std::size_t rows, std::size_t cols,
                    std::size_t border_px = 1);

struct Histogram {
    std::size_t dim = 0;
    std::vector<double> edges;      // bins + 1
    std::vector<std::size_t> counts;
    std::vector<double> reference;  // N * width * phi(bin center)
};

inline constexpr std::size_t kDefaultHistogramBins = 50;

Histogram histogram_dim(const EmbeddingTable& table, std::size_t dim, std::size_t bins = kDefaultHistogramBins);
Histogram histogram_values(const std::vector<double>& values, std::size_t bins);

struct ScatterRow {
    double zi = 0.0;
    double zj = 0.0;
    int label = 0;

    bool operator==(const ScatterRow&) const = default;
};

std::vector<ScatterRow> scatter_dims(const EmbeddingTable& table, std::size_t dim_i, std::size_t dim_j);

// CSV and JSON persistence.
void write_embedding_csv(const EmbeddingTable& table, const std::filesystem::path& path);
EmbeddingTable read_embedding_csv(const std::filesystem::path& path);
void write_histogram_csv(const Histogram& h, const std::filesystem::path& path);
void write_scatter_csv(const std::vector<ScatterRow>& rows, std::size_t dim_i, std::size_t dim_j,
                       const std::filesystem::path& path);

struct CentroidTable {
    std::string checkpoint_id;
    std::map<std::string, LatentVec> labels;  // subtype name -> centroid
};
CentroidTable centroid_table(const std::map<int, LatentVec>& by_label, std::string checkpoint_id);
void write_centroids_json(const CentroidTable& t, const std::filesystem::path& path);
CentroidTable read_centroids_json(const std::filesystem::path& path);

/// Quick-look rasterizations for the CSV exports.
data::Image plot_histogram(const Histogram& h, std::size_t width = 512, std::size_t height = 256);
data::Image plot_scatter(const std::vector<ScatterRow>& rows, std::size_t size = 512);

struct ArtifactOptions {
    std::size_t bins = kDefaultHistogramBins;
    std::size_t scatter_i = 1;
    std::size_t scatter_j = 7;
};

/// Writes hist_dim<k>.csv/.png for every dimension and
/// scatter_dim<i>_dim<j>.csv/.png into out_dir. Returns the files written.
std::vector<std::filesystem::path> export_embedding_artifacts(const EmbeddingTable& table,
                                                              const std::filesystem::path& out_dir,
                                                              const ArtifactOptions& options = {});

/// Nearest class-mean classifier in pixel space.
class ImageCentroidClassifier {
public:
    ImageCentroidClassifier(const core::Tensor<float>& images, const std::vector<int>& labels);
    int classify(const data::Image& image) const;
    const std::map<int, std::vector<double>>& means() const { return means_; }

private:
    std::map<int, std::vector<double>> means_;
};

}  // namespace bvae::lab

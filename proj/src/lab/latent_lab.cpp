#include "bridgevae/lab/latent_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bridgevae/data/bridge.hpp"
#include "bridgevae/data/dataset.hpp"

namespace bvae::lab {

namespace fs = std::filesystem;

EmbeddingTable embed_dataset(const model::Vae<float>& model, const core::Tensor<float>& images,
                             const std::vector<int>& labels, std::string checkpoint_id) {
    const auto& p = model.profile();
    if (images.rank() != 4 || images.dim(1) != p.height || images.dim(2) != p.width || images.dim(3) != 1) {
        throw ShapeError("embed_dataset: images " + core::shape_str(images.shape()) +
                         " do not match the checkpoint profile " + std::to_string(p.height) + "x" +
                         std::to_string(p.width));
    }
    if (labels.size() != images.dim(0)) throw ShapeError("embed_dataset: one label per image required");
    EmbeddingTable table{std::move(checkpoint_id), p.latent_dim, {}};
    table.rows.reserve(labels.size());
    for (std::size_t i = 0; i < images.dim(0); ++i) {
        const auto out = model.encode(images.slice_batch(i, i + 1));
        LatentVec z(out.mean.values().begin(), out.mean.values().end());
        table.rows.push_back({i, labels[i], std::move(z)});
    }
    return table;
}

data::Image decode_point(const model::Vae<float>& model, const LatentVec& z) {
    const std::size_t dim = model.profile().latent_dim;
    if (z.size() != dim) {
        throw ShapeError("latent vector has " + std::to_string(z.size()) + " coordinates, model expects " +
                         std::to_string(dim));
    }
    core::Tensor<float> t({1, dim});
    for (std::size_t i = 0; i < dim; ++i) {
        if (!std::isfinite(z[i])) throw InvalidArgument("latent coordinate " + std::to_string(i) + " is not finite");
        t[i] = static_cast<float>(z[i]);
    }
    return data::image_from_tensor(model.decode(t), 0);
}

std::vector<data::Image> decode_points(const model::Vae<float>& model, const std::vector<LatentVec>& points) {
    std::vector<data::Image> out;
    out.reserve(points.size());
    for (const auto& z : points) out.push_back(decode_point(model, z));
    return out;
}

std::map<int, LatentVec> centroids(const EmbeddingTable& table, const std::vector<int>& required) {
    std::map<int, LatentVec> sums;
    std::map<int, std::size_t> counts;
    for (const auto& r : table.rows) {
        auto& s = sums[r.label];
        if (s.empty()) s.assign(r.z.size(), 0.0);
        if (s.size() != r.z.size()) throw ShapeError("centroids: rows disagree on latent dimension");
        for (std::size_t d = 0; d < r.z.size(); ++d) s[d] += r.z[d];
        ++counts[r.label];
    }
    for (int label : required) {
        if (!counts.count(label)) throw InvalidArgument("centroids: label " + std::to_string(label) + " has no rows");
    }
    if (sums.empty()) throw InvalidArgument("centroids: empty table");
    std::map<int, LatentVec> out;
    for (auto& [label, s] : sums) {
        if (!required.empty() && std::find(required.begin(), required.end(), label) == required.end()) continue;
        for (auto& v : s) v /= static_cast<double>(counts[label]);
        out.emplace(label, std::move(s));
    }
    return out;
}

std::vector<LatentVec> interpolate(const LatentVec& a, const LatentVec& b, std::size_t steps) {
    if (steps < 2) throw InvalidArgument("morph needs at least 2 steps");
    if (a.size() != b.size()) throw ShapeError("morph endpoints differ in dimension");
    std::vector<LatentVec> pts;
    pts.reserve(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        LatentVec z(a.size());
        if (k == 0) {
            z = a;
        } else if (k + 1 == steps) {
            z = b;
        } else {
            const double t = static_cast<double>(k) / static_cast<double>(steps - 1);
            for (std::size_t d = 0; d < a.size(); ++d) z[d] = (1.0 - t) * a[d] + t * b[d];
        }
        pts.push_back(std::move(z));
    }
    return pts;
}

MorphTrack morph(const model::Vae<float>& model, const LatentVec& a, const LatentVec& b, std::size_t steps) {
    MorphTrack track{a, b, steps, interpolate(a, b, steps), {}};
    track.frames = decode_points(model, track.points);
    return track;
}

std::vector<std::pair<int, int>> subtype_pairs(int label_count) {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < label_count; ++i)
        for (int j = i + 1; j < label_count; ++j) out.emplace_back(i, j);
    return out;
}

std::vector<LatentVec> boundary_grid(double magnitude, std::size_t latent_dim) {
    if (!(magnitude > 0.0)) throw InvalidArgument("boundary magnitude must be positive");
    if (latent_dim == 0 || latent_dim > 20) throw InvalidArgument("boundary grid dimension must be in [1, 20]");
    const std::size_t count = std::size_t{1} << latent_dim;
    std::vector<LatentVec> out(count, LatentVec(latent_dim));
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t d = 0; d < latent_dim; ++d)
            out[i][d] = ((i >> (latent_dim - 1 - d)) & 1u) ? magnitude : -magnitude;
    return out;
}

data::Image montage(const std::vector<data::Image>& images, std::size_t rows, std::size_t cols,
                    std::size_t border_px) {
    if (rows == 0 || cols == 0) throw InvalidArgument("montage: rows and cols must be positive");
    if (images.empty()) throw InvalidArgument("montage: no images");
    if (images.size() > rows * cols) {
        throw InvalidArgument("montage: " + std::to_string(images.size()) + " images do not fit a " +
                              std::to_string(rows) + "x" + std::to_string(cols) + " grid");
    }
    const std::size_t w = images.front().width, h = images.front().height;
    for (const auto& im : images) {
        if (im.width != w || im.height != h) throw ShapeError("montage: images differ in size");
    }
    const std::size_t cw = w + border_px, ch = h + border_px;
    data::Image sheet(cols * cw, rows * ch);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            for (std::size_t b = 0; b < border_px; ++b) {
                for (std::size_t y = 0; y < ch; ++y) sheet.at(c * cw + w + b, r * ch + y) = kSeparatorValue;
                for (std::size_t x = 0; x < cw; ++x) sheet.at(c * cw + x, r * ch + h + b) = kSeparatorValue;
            }
            const std::size_t idx = r * cols + c;
            if (idx >= images.size()) continue;
            for (std::size_t y = 0; y < h; ++y)
                std::copy_n(images[idx].pixels.data() + y * w, w, sheet.pixels.data() + (r * ch + y) * sheet.width + c * cw);
        }
    return sheet;
}

Histogram histogram_values(const std::vector<double>& values, std::size_t bins) {
    if (bins == 0) throw InvalidArgument("histogram needs at least one bin");
    if (values.empty()) throw InvalidArgument("histogram of an empty sample");
    auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    Histogram h;
    h.edges.resize(bins + 1);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = lo + width * static_cast<double>(i);
    h.edges.back() = hi;
    h.counts.assign(bins, 0);
    for (double v : values) {
        auto b = static_cast<std::size_t>((v - lo) / width);
        h.counts[std::min(b, bins - 1)]++;
    }
    const double n = static_cast<double>(values.size());
    h.reference.resize(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        const double c = 0.5 * (h.edges[i] + h.edges[i + 1]);
        h.reference[i] = n * width * std::exp(-0.5 * c * c) / std::sqrt(2.0 * std::numbers::pi);
    }
    return h;
}

Histogram histogram_dim(const EmbeddingTable& table, std::size_t dim, std::size_t bins) {
    if (dim >= table.latent_dim) {
        throw InvalidArgument("dimension " + std::to_string(dim) + " outside [0, " +
                              std::to_string(table.latent_dim) + ")");
    }
    std::vector<double> values;
    values.reserve(table.rows.size());
    for (const auto& r : table.rows) values.push_back(r.z.at(dim));
    Histogram h = histogram_values(values, bins);
    h.dim = dim;
    return h;
}

std::vector<ScatterRow> scatter_dims(const EmbeddingTable& table, std::size_t dim_i, std::size_t dim_j) {
    if (dim_i >= table.latent_dim || dim_j >= table.latent_dim) {
        throw InvalidArgument("scatter dimension outside [0, " + std::to_string(table.latent_dim) + ")");
    }
    if (dim_i == dim_j) throw InvalidArgument("scatter needs two distinct dimensions");
    std::vector<ScatterRow> out;
    out.reserve(table.rows.size());
    for (const auto& r : table.rows) out.push_back({r.z.at(dim_i), r.z.at(dim_j), r.label});
    return out;
}

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_embedding_csv(const EmbeddingTable& table, const fs::path& path) {
    auto out = open_out(path);
    out << "# checkpoint_id=" << table.checkpoint_id << '\n';
    out << "sample_id,label";
    for (std::size_t d = 0; d < table.latent_dim; ++d) out << ",z" << d;
    out << '\n';
    for (const auto& r : table.rows) {
        out << r.sample_id << ',' << r.label;
        for (double v : r.z) out << ',' << fmt(v);
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

EmbeddingTable read_embedding_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embedding table " + path.string());
    EmbeddingTable t;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line.rfind("# checkpoint_id=", 0) == 0) {
            t.checkpoint_id = line.substr(16);
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!header_seen) {
            if (cells.size() < 3 || cells[0] != "sample_id") throw IoError(path.string() + ": bad header");
            t.latent_dim = cells.size() - 2;
            header_seen = true;
            continue;
        }
        if (cells.size() != t.latent_dim + 2) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": wrong column count");
        }
        EmbeddingRow r;
        try {
            r.sample_id = std::stoull(cells[0]);
            r.label = std::stoi(cells[1]);
            for (std::size_t d = 0; d < t.latent_dim; ++d) r.z.push_back(std::stod(cells[d + 2]));
        } catch (const std::exception&) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": unparsable value");
        }
        t.rows.push_back(std::move(r));
    }
    if (!header_seen) throw IoError(path.string() + ": missing header");
    return t;
}

void write_histogram_csv(const Histogram& h, const fs::path& path) {
    auto out = open_out(path);
    out << "bin_lo,bin_hi,count,reference\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        out << fmt(h.edges[i]) << ',' << fmt(h.edges[i + 1]) << ',' << h.counts[i] << ',' << fmt(h.reference[i])
            << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

void write_scatter_csv(const std::vector<ScatterRow>& rows, std::size_t dim_i, std::size_t dim_j,
                       const fs::path& path) {
    auto out = open_out(path);
    out << 'z' << dim_i << ",z" << dim_j << ",label\n";
    for (const auto& r : rows) out << fmt(r.zi) << ',' << fmt(r.zj) << ',' << r.label << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

CentroidTable centroid_table(const std::map<int, LatentVec>& by_label, std::string checkpoint_id) {
    CentroidTable t{std::move(checkpoint_id), {}};
    for (const auto& [label, z] : by_label) {
        t.labels.emplace(std::string(data::subtype_name(data::subtype_from_label(label))), z);
    }
    return t;
}

void write_centroids_json(const CentroidTable& t, const fs::path& path) {
    nlohmann::json j{{"checkpoint_id", t.checkpoint_id}, {"labels", t.labels}};
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

CentroidTable read_centroids_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open centroid table " + path.string());
    try {
        const auto j = nlohmann::json::parse(in);
        CentroidTable t;
        j.at("checkpoint_id").get_to(t.checkpoint_id);
        j.at("labels").get_to(t.labels);
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed centroid table " + path.string() + ": " + e.what());
    }
}

data::Image plot_histogram(const Histogram& h, std::size_t width, std::size_t height) {
    data::Image im(width, height);
    const std::size_t bins = h.counts.size();
    double peak = 1.0;
    for (std::size_t i = 0; i < bins; ++i) peak = std::max({peak, static_cast<double>(h.counts[i]), h.reference[i]});
    for (std::size_t x = 0; x < width; ++x) {
        const std::size_t b = std::min(bins - 1, x * bins / width);
        const auto bar = static_cast<std::size_t>(std::lround(h.counts[b] / peak * (height - 1)));
        for (std::size_t y = 0; y < bar; ++y) im.at(x, height - 1 - y) = 0.6f;
        const auto ref = static_cast<std::size_t>(std::lround(h.reference[b] / peak * (height - 1)));
        im.at(x, height - 1 - std::min(ref, height - 1)) = 1.0f;
    }
    return im;
}

data::Image plot_scatter(const std::vector<ScatterRow>& rows, std::size_t size) {
    data::Image im(size, size);
    if (rows.empty()) return im;
    double lo = rows.front().zi, hi = lo;
    for (const auto& r : rows) {
        lo = std::min({lo, r.zi, r.zj});
        hi = std::max({hi, r.zi, r.zj});
    }
    if (hi == lo) hi = lo + 1.0;
    const auto to_px = [&](double v) {
        return static_cast<std::size_t>(std::clamp((v - lo) / (hi - lo), 0.0, 1.0) * static_cast<double>(size - 1));
    };
    for (const auto& r : rows) {
        // label encoded as gray level so classes stay distinguishable
        im.at(to_px(r.zi), size - 1 - to_px(r.zj)) = 0.3f + 0.1f * static_cast<float>(r.label % 8);
    }
    return im;
}

std::vector<fs::path> export_embedding_artifacts(const EmbeddingTable& table, const fs::path& out_dir,
                                                 const ArtifactOptions& options) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    std::vector<fs::path> written;
    for (std::size_t d = 0; d < table.latent_dim; ++d) {
        const Histogram h = histogram_dim(table, d, options.bins);
        const fs::path csv = out_dir / ("hist_dim" + std::to_string(d) + ".csv");
        const fs::path png = out_dir / ("hist_dim" + std::to_string(d) + ".png");
        write_histogram_csv(h, csv);
        data::write_png(plot_histogram(h), png);
        written.push_back(csv);
        written.push_back(png);
    }
    const auto rows = scatter_dims(table, options.scatter_i, options.scatter_j);
    const std::string stem =
        "scatter_dim" + std::to_string(options.scatter_i) + "_dim" + std::to_string(options.scatter_j);
    write_scatter_csv(rows, options.scatter_i, options.scatter_j, out_dir / (stem + ".csv"));
    data::write_png(plot_scatter(rows), out_dir / (stem + ".png"));
    written.push_back(out_dir / (stem + ".csv"));
    written.push_back(out_dir / (stem + ".png"));
    return written;
}

ImageCentroidClassifier::ImageCentroidClassifier(const core::Tensor<float>& images, const std::vector<int>& labels) {
    if (images.rank() != 4 || labels.size() != images.dim(0)) {
        throw ShapeError("classifier: need N x H x W x 1 images and N labels");
    }
    const std::size_t px = images.size() / images.dim(0);
    std::map<int, std::size_t> counts;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& m = means_[labels[i]];
        if (m.empty()) m.assign(px, 0.0);
        for (std::size_t k = 0; k < px; ++k) m[k] += images[i * px + k];
        ++counts[labels[i]];
    }
    for (auto& [label, m] : means_)
        for (auto& v : m) v /= static_cast<double>(counts[label]);
}

int ImageCentroidClassifier::classify(const data::Image& image) const {
    int best = -1;
    double best_d = 0.0;
    for (const auto& [label, m] : means_) {
        if (m.size() != image.pixels.size()) throw ShapeError("classifier: image size mismatch");
        double d = 0.0;
        for (std::size_t k = 0; k < m.size(); ++k) {
            const double e = image.pixels[k] - m[k];
            d += e * e;
        }
        if (best < 0 || d < best_d) {
            best = label;
            best_d = d;
        }
    }
    return best;
}

}  // namespace bvae::lab

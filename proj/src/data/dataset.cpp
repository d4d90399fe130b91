#include "bridgevae/data/dataset.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "bridgevae/core/rng.hpp"

namespace bvae::data {

namespace fs = std::filesystem;

std::string entry_path(Subtype s, int frame, const AugmentParams& p) {
    char name[64];
    std::snprintf(name, sizeof(name), "%02d_%+.1f_%.4f_%.3f.png", frame, p.rotation_deg, p.hscale, p.vscale);
    return std::string(subtype_name(s)) + "/" + name;
}

DatasetManifest plan_dataset(std::uint64_t seed) {
    DatasetManifest m;
    m.label_dictionary = label_dictionary();
    m.seed = seed;
    m.renderer_version = kRendererVersion;
    const auto grid = augmentation_grid();
    for (Subtype s : kAllSubtypes)
        for (int f = 0; f < static_cast<int>(kFramesPerSubtype); ++f)
            for (const auto& p : grid)
                m.entries.push_back({entry_path(s, f, p), label_of(s), std::string(subtype_name(s)), f, p});
    return m;
}

std::size_t configured_threads() {
    std::size_t n = 1;
    if (const char* env = std::getenv("BRIDGEVAE_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) n = static_cast<std::size_t>(v);
    }
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    return std::min(n, hw);
}

DatasetManifest build_dataset(const fs::path& out_dir, std::uint64_t seed, const BuildOptions& options) {
    DatasetManifest m = plan_dataset(seed);
    m.root = out_dir;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    for (Subtype s : kAllSubtypes) {
        fs::create_directories(out_dir / std::string(subtype_name(s)), ec);
        if (ec) throw IoError("cannot create subtype directory under " + out_dir.string() + ": " + ec.message());
    }

    const auto grid = augmentation_grid();
    const std::size_t per_frame = grid.size();
    const std::size_t jobs = kSubtypeCount * kFramesPerSubtype;  // one job per base render
    std::atomic<std::size_t> next{0}, done{0};
    std::mutex err_mu, progress_mu;
    std::string first_error;

    const auto worker = [&] {
        for (std::size_t job = next++; job < jobs; job = next++) {
            try {
                const Subtype s = kAllSubtypes[job / kFramesPerSubtype];
                const int frame = static_cast<int>(job % kFramesPerSubtype);
                const Image base = render_bridge(BridgeRenderSpec::for_frame(s, frame));
                for (std::size_t a = 0; a < per_frame; ++a) {
                    const auto& entry = m.entries[job * per_frame + a];
                    write_png(augment(base, entry.augment), out_dir / entry.path);
                }
            } catch (const std::exception& e) {
                std::lock_guard lock(err_mu);
                if (first_error.empty()) first_error = e.what();
                return;
            }
            const std::size_t d = (done += per_frame);
            if (options.progress) {
                std::lock_guard lock(progress_mu);
                options.progress(d, m.entries.size());
            }
        }
    };
    const std::size_t threads = std::max<std::size_t>(1, options.threads);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (!first_error.empty()) throw IoError(first_error);

    write_manifest(m, out_dir / "manifest.json");
    return m;
}

void write_manifest(const DatasetManifest& m, const fs::path& path) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : m.entries) {
        entries.push_back({{"path", e.path},
                           {"label", e.label},
                           {"subtype", e.subtype},
                           {"frame", e.frame},
                           {"rotation_deg", e.augment.rotation_deg},
                           {"hscale", e.augment.hscale},
                           {"vscale", e.augment.vscale}});
    }
    nlohmann::json j{{"label_dictionary", m.label_dictionary},
                     {"seed", m.seed},
                     {"renderer_version", m.renderer_version},
                     {"entries", entries}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(1) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

DatasetManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    DatasetManifest m;
    try {
        const auto j = nlohmann::json::parse(in);
        j.at("label_dictionary").get_to(m.label_dictionary);
        j.at("seed").get_to(m.seed);
        j.at("renderer_version").get_to(m.renderer_version);
        for (const auto& e : j.at("entries")) {
            m.entries.push_back({e.at("path").get<std::string>(), e.at("label").get<int>(),
                                 e.at("subtype").get<std::string>(), e.at("frame").get<int>(),
                                 AugmentParams{e.at("rotation_deg").get<double>(), e.at("hscale").get<double>(),
                                               e.at("vscale").get<double>()}});
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest " + path.string() + ": " + e.what());
    }
    m.root = path.parent_path();
    return m;
}

core::Tensor<float> stack_images(const std::vector<Image>& images) {
    if (images.empty()) throw InvalidArgument("stack_images: no images");
    const std::size_t w = images.front().width, h = images.front().height;
    std::vector<float> data;
    data.reserve(images.size() * w * h);
    for (const auto& im : images) {
        if (im.width != w || im.height != h) throw ShapeError("stack_images: images differ in size");
        data.insert(data.end(), im.pixels.begin(), im.pixels.end());
    }
    return core::Tensor<float>({images.size(), h, w, 1}, std::move(data));
}

Image image_from_tensor(const core::Tensor<float>& batch, std::size_t index) {
    if (batch.rank() != 4 || batch.dim(3) != 1 || index >= batch.dim(0)) {
        throw ShapeError("image_from_tensor: expected N x H x W x 1 and a valid index");
    }
    Image im(batch.dim(2), batch.dim(1));
    const std::size_t n = im.pixels.size();
    std::copy_n(batch.data() + index * n, n, im.pixels.begin());
    return im;
}

LoadedDataset load_dataset(const DatasetManifest& manifest, const std::vector<std::size_t>& indices,
                           std::size_t downsample_factor) {
    std::vector<std::size_t> order = indices;
    if (order.empty()) {
        order.resize(manifest.entries.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    }
    if (order.empty()) throw InvalidArgument("load_dataset: manifest has no entries");
    const std::size_t w = kCanvasWidth / downsample_factor, h = kCanvasHeight / downsample_factor;
    LoadedDataset out{core::Tensor<float>({order.size(), h, w, 1}), {}};
    out.labels.reserve(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (order[i] >= manifest.entries.size()) throw InvalidArgument("load_dataset: entry index out of range");
        const auto& e = manifest.entries[order[i]];
        Image im;
        try {
            im = downsample(read_png(manifest.root / e.path), downsample_factor);
        } catch (const Error& err) {
            throw IoError("dataset entry " + std::to_string(order[i]) + " (" + e.path + "): " + err.what());
        }
        if (im.width != w || im.height != h) {
            throw IoError("dataset entry " + std::to_string(order[i]) + " (" + e.path + ") has size " +
                          std::to_string(im.width) + "x" + std::to_string(im.height));
        }
        std::copy(im.pixels.begin(), im.pixels.end(), out.images.data() + i * w * h);
        out.labels.push_back(e.label);
    }
    return out;
}

SubsetSplit split_entries(const DatasetManifest& manifest, const std::vector<int>& labels,
                          std::size_t train_per_class, std::size_t holdout_per_class, std::uint64_t seed) {
    SubsetSplit split;
    core::Rng rng(seed);
    for (int label : labels) {
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < manifest.entries.size(); ++i)
            if (manifest.entries[i].label == label) pool.push_back(i);
        if (pool.size() < train_per_class + holdout_per_class) {
            throw InvalidArgument("label " + std::to_string(label) + " has only " + std::to_string(pool.size()) +
                                  " entries");
        }
        rng.shuffle(pool.begin(), pool.end());
        split.train.insert(split.train.end(), pool.begin(), pool.begin() + train_per_class);
        split.holdout.insert(split.holdout.end(), pool.begin() + train_per_class,
                             pool.begin() + train_per_class + holdout_per_class);
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.holdout.begin(), split.holdout.end());
    return split;
}

}  // namespace bvae::data

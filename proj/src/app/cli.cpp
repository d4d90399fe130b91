#include "bridgevae/app/cli.hpp"

#include <cctype>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "bridgevae/app/service.hpp"
#include "bridgevae/app/session.hpp"
#include "bridgevae/data/dataset.hpp"
#include "bridgevae/lab/latent_lab.hpp"
#include "bridgevae/model/trainer.hpp"

namespace bvae::app {

namespace {

namespace fs = std::filesystem;

class UsageError : public Error {
public:
    using Error::Error;
};

std::vector<std::string> split_list(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep)) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

lab::LatentVec parse_vector(const std::string& text) {
    lab::LatentVec z;
    for (const auto& item : split_list(text, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size()) throw UsageError("cannot parse '" + item + "' as a number");
        z.push_back(v);
    }
    return z;
}

std::string file_token(const std::string& name) {
    std::string out = name;
    for (char& c : out) {
        if (c == ' ' || c == '/') c = '-';
    }
    return out;
}

std::size_t downsample_factor(const model::ArchitectureProfile& p) {
    if (data::kCanvasWidth % p.width != 0 || data::kCanvasHeight % p.height != 0 ||
        data::kCanvasWidth / p.width != data::kCanvasHeight / p.height) {
        throw InvalidArgument("profile " + p.name + " is not an integer reduction of the 512x128 canvas");
    }
    return data::kCanvasWidth / p.width;
}

std::vector<int> labels_from_names(const std::string& names) {
    std::vector<int> labels;
    for (const auto& n : split_list(names, ',')) labels.push_back(data::label_of(data::subtype_from_name(n)));
    return labels;
}

struct Selection {
    std::string subtypes;
    std::size_t per_class = 0;
    std::uint64_t seed = 0;

    void add_options(CLI::App* cmd) {
        cmd->add_option("--subtypes", subtypes, "Comma-separated subtype names (default: all)");
        cmd->add_option("--per-class", per_class, "Images drawn per subtype (default: all)");
        cmd->add_option("--seed", seed, "Seed for the subset draw");
    }

    std::vector<std::size_t> indices(const data::DatasetManifest& m) const {
        if (subtypes.empty() && per_class == 0) return {};
        std::vector<int> labels = subtypes.empty() ? std::vector<int>{} : labels_from_names(subtypes);
        if (labels.empty()) {
            for (auto s : data::kAllSubtypes) labels.push_back(data::label_of(s));
        }
        const std::size_t n = per_class == 0 ? data::kImagesPerSubtype : per_class;
        return data::split_entries(m, labels, n, 0, seed).train;
    }
};

data::DatasetManifest open_manifest(const fs::path& dir) {
    return data::read_manifest(fs::is_directory(dir) ? dir / "manifest.json" : dir);
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_bytes(const fs::path& p, const std::string& bytes) {
    ensure_parent(p);
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write " + p.string());
}

InferenceService* g_service = nullptr;

void handle_signal(int) {
    if (g_service) g_service->stop();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Bridge facade VAE toolkit", "bridgevae"};
    app.require_subcommand(1);

    // gen-data
    fs::path gen_out;
    std::uint64_t gen_seed = 0;
    std::size_t gen_threads = 0;
    auto* gen = app.add_subcommand("gen-data", "Render the 9600-image bridge dataset");
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--seed", gen_seed, "Seed recorded in the manifest");
    gen->add_option("--threads", gen_threads, "Worker threads (default: BRIDGEVAE_THREADS or 1)");

    // train
    fs::path train_data, train_out, train_history;
    std::string train_profile = "desk";
    model::TrainConfig train_cfg;
    Selection train_sel;
    auto* train = app.add_subcommand("train", "Train a VAE and write a checkpoint");
    train->add_option("--data", train_data, "Dataset directory or manifest")->required();
    train->add_option("--out", train_out, "Checkpoint path")->required();
    train->add_option("--profile", train_profile, "Architecture profile (full or desk)");
    train->add_option("--epochs", train_cfg.epochs, "Epochs");
    train->add_option("--batch-size", train_cfg.batch_size, "Mini-batch size");
    train->add_option("--lr", train_cfg.optimizer.learning_rate, "RMSProp learning rate");
    train->add_option("--kl-coef", train_cfg.kl_coefficient, "KL loss coefficient");
    train->add_option("--history", train_history, "Loss history CSV (default: <out>.history.csv)");
    train_sel.add_options(train);

    // embed
    fs::path embed_ckpt, embed_data, embed_out, embed_artifacts;
    Selection embed_sel;
    auto* embed = app.add_subcommand("embed", "Encode a dataset into an embedding table");
    embed->add_option("--ckpt", embed_ckpt, "Checkpoint")->required();
    embed->add_option("--data", embed_data, "Dataset directory or manifest")->required();
    embed->add_option("--out", embed_out, "Embedding CSV")->required();
    embed->add_option("--artifacts-dir", embed_artifacts, "Also write histogram and scatter artifacts here");
    embed_sel.add_options(embed);

    // centroids
    fs::path cent_embedding, cent_out;
    auto* cent = app.add_subcommand("centroids", "Per-subtype centroids of an embedding table");
    cent->add_option("--embedding", cent_embedding, "Embedding CSV")->required();
    cent->add_option("--out", cent_out, "centroids.json path")->required();

    // morph
    fs::path morph_ckpt, morph_out, morph_centroids;
    std::string morph_from, morph_to;
    std::size_t morph_steps = lab::kDefaultMorphSteps;
    auto* morph = app.add_subcommand("morph", "Decode a straight path between two subtype centroids");
    morph->add_option("--ckpt", morph_ckpt, "Checkpoint")->required();
    morph->add_option("--from", morph_from, "Start subtype name or comma-separated z")->required();
    morph->add_option("--to", morph_to, "End subtype name or comma-separated z")->required();
    morph->add_option("--steps", morph_steps, "Frames including endpoints");
    morph->add_option("--centroids", morph_centroids, "Centroid table (default: beside the checkpoint)");
    morph->add_option("--out-dir", morph_out, "Output directory")->required();

    // sample-boundary
    fs::path sb_ckpt, sb_out, sb_frames;
    double sb_magnitude = 4.0;
    auto* sb = app.add_subcommand("sample-boundary", "Decode every +-m corner of the latent cube into one sheet");
    sb->add_option("--ckpt", sb_ckpt, "Checkpoint")->required();
    sb->add_option("--magnitude", sb_magnitude, "Corner magnitude m")->check(CLI::PositiveNumber);
    sb->add_option("--out", sb_out, "Sheet PNG")->required();
    sb->add_option("--frames-dir", sb_frames, "Also write each decode as boundary_<k>.png");

    // hist
    fs::path hist_embedding, hist_out, hist_png;
    std::size_t hist_dim = 0, hist_bins = lab::kDefaultHistogramBins;
    auto* hist = app.add_subcommand("hist", "Histogram of one latent dimension");
    hist->add_option("--embedding", hist_embedding, "Embedding CSV")->required();
    hist->add_option("--dim", hist_dim, "0-based dimension")->required();
    hist->add_option("--bins", hist_bins, "Bin count")->check(CLI::PositiveNumber);
    hist->add_option("--out", hist_out, "Histogram CSV")->required();
    hist->add_option("--png", hist_png, "Also write a plot");

    // scatter
    fs::path sc_embedding, sc_out, sc_png;
    std::size_t sc_i = 1, sc_j = 7;
    auto* scatter = app.add_subcommand("scatter", "Project the embedding onto two latent dimensions");
    scatter->add_option("--embedding", sc_embedding, "Embedding CSV")->required();
    scatter->add_option("--dim-i", sc_i, "First 0-based dimension");
    scatter->add_option("--dim-j", sc_j, "Second 0-based dimension");
    scatter->add_option("--out", sc_out, "Scatter CSV")->required();
    scatter->add_option("--png", sc_png, "Also write a plot");

    // export-montage
    std::vector<fs::path> em_inputs;
    fs::path em_out;
    std::size_t em_rows = 0, em_cols = 0, em_border = 1;
    auto* em = app.add_subcommand("export-montage", "Tile PNG images into a grid sheet");
    em->add_option("inputs", em_inputs, "Input PNGs in placement order")->required();
    em->add_option("--rows", em_rows, "Grid rows (default: enough for the columns)");
    em->add_option("--cols", em_cols, "Grid columns (default: one row)");
    em->add_option("--border", em_border, "Separator width in pixels");
    em->add_option("--out", em_out, "Sheet PNG")->required();

    // serve
    ServiceConfig serve_cfg;
    fs::path serve_centroids;
    auto* serve = app.add_subcommand("serve", "Run the HTTP inference service");
    serve->add_option("--ckpt", serve_cfg.checkpoint, "Checkpoint")->required();
    serve->add_option("--host", serve_cfg.host, "Bind address");
    serve->add_option("--port", serve_cfg.port, "Port (0 picks a free one)");
    serve->add_option("--centroids", serve_centroids, "Centroid table (default: beside the checkpoint)");
    serve->add_option("--max-body-bytes", serve_cfg.max_body_bytes, "Request size limit");

    // decode
    fs::path dec_ckpt, dec_out;
    std::string dec_z;
    auto* dec = app.add_subcommand("decode", "Decode one latent vector to a PNG");
    dec->add_option("--ckpt", dec_ckpt, "Checkpoint")->required();
    dec->add_option("--z", dec_z, "Comma-separated coordinates")->required();
    dec->add_option("--out", dec_out, "PNG path")->required();

    std::vector<const char*> argv{"bridgevae"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        if (e.get_exit_code() != 0) {
            err << app.help();
            return 2;
        }
        return 0;
    }

    try {
        for (const fs::path* p : {&train_out, &train_history, &embed_out, &cent_out, &sb_out, &hist_out, &hist_png,
                                  &sc_out, &sc_png, &em_out}) {
            if (!p->empty()) ensure_parent(*p);
        }
        if (gen->parsed()) {
            data::BuildOptions opts;
            opts.threads = gen_threads == 0 ? data::configured_threads() : gen_threads;
            const auto m = data::build_dataset(gen_out, gen_seed, opts);
            out << "wrote " << m.entries.size() << " images to " << gen_out.string() << "\n";
        } else if (train->parsed()) {
            const auto profile = model::ArchitectureProfile::by_name(train_profile);
            train_cfg.seed = train_sel.seed;
            const auto manifest = open_manifest(train_data);
            const auto set = data::load_dataset(manifest, train_sel.indices(manifest), downsample_factor(profile));
            out << "training " << profile.name << " on " << set.labels.size() << " images\n";
            auto result = model::train(set.images, profile, train_cfg, [&](const model::EpochLoss& e) {
                out << "epoch " << e.epoch << " loss " << e.total << " (rec " << e.reconstruction << ", kl "
                    << e.kl << ")\n";
            });
            model::save_checkpoint(model::checkpoint_from_training(result, train_cfg), train_out);
            const fs::path history = train_history.empty() ? fs::path(train_out.string() + ".history.csv")
                                                           : train_history;
            model::write_loss_history_csv(result.history, history);
            out << "wrote " << train_out.string() << "\n";
        } else if (embed->parsed()) {
            const auto session = Session::load(embed_ckpt);
            const auto manifest = open_manifest(embed_data);
            const auto set = data::load_dataset(manifest, embed_sel.indices(manifest),
                                                downsample_factor(session.profile));
            const auto table = lab::embed_dataset(session.model, set.images, set.labels, session.checkpoint_id);
            lab::write_embedding_csv(table, embed_out);
            out << "wrote " << table.rows.size() << " rows to " << embed_out.string() << "\n";
            if (!embed_artifacts.empty()) {
                const auto files = lab::export_embedding_artifacts(table, embed_artifacts);
                out << "wrote " << files.size() << " artifacts to " << embed_artifacts.string() << "\n";
            }
        } else if (cent->parsed()) {
            const auto table = lab::read_embedding_csv(cent_embedding);
            const auto c = lab::centroid_table(lab::centroids(table), table.checkpoint_id);
            lab::write_centroids_json(c, cent_out);
            out << "wrote " << c.labels.size() << " centroids to " << cent_out.string() << "\n";
        } else if (morph->parsed()) {
            const auto session = Session::load(
                morph_ckpt, morph_centroids.empty() ? std::nullopt : std::optional<fs::path>(morph_centroids));
            const auto endpoint = [&](const std::string& text) {
                if (!text.empty() && (std::isdigit(static_cast<unsigned char>(text[0])) || text[0] == '-' ||
                                      text[0] == '+' || text[0] == '.')) {
                    return parse_vector(text);
                }
                return session.centroid(text);
            };
            const auto track = lab::morph(session.model, endpoint(morph_from), endpoint(morph_to), morph_steps);
            const std::string stem = "morph_" + file_token(morph_from) + "_" + file_token(morph_to);
            fs::create_directories(morph_out);
            for (std::size_t k = 0; k < track.frames.size(); ++k) {
                data::write_png(track.frames[k], morph_out / (stem + "_" + std::to_string(k) + ".png"));
            }
            data::write_png(lab::montage(track.frames, 1, track.frames.size()), morph_out / (stem + "_strip.png"));
            out << "wrote " << track.frames.size() << " frames to " << morph_out.string() << "\n";
        } else if (sb->parsed()) {
            const auto session = Session::load(sb_ckpt);
            const auto points = lab::boundary_grid(sb_magnitude, session.profile.latent_dim);
            const auto frames = lab::decode_points(session.model, points);
            std::size_t side = 1;
            while (side * side < frames.size()) ++side;
            data::write_png(lab::montage(frames, (frames.size() + side - 1) / side, side), sb_out);
            if (!sb_frames.empty()) {
                fs::create_directories(sb_frames);
                for (std::size_t k = 0; k < frames.size(); ++k) {
                    data::write_png(frames[k], sb_frames / ("boundary_" + std::to_string(k) + ".png"));
                }
            }
            out << "wrote " << frames.size() << " decodes to " << sb_out.string() << "\n";
        } else if (hist->parsed()) {
            const auto table = lab::read_embedding_csv(hist_embedding);
            const auto h = lab::histogram_dim(table, hist_dim, hist_bins);
            lab::write_histogram_csv(h, hist_out);
            if (!hist_png.empty()) data::write_png(lab::plot_histogram(h), hist_png);
            out << "wrote " << hist_out.string() << "\n";
        } else if (scatter->parsed()) {
            const auto table = lab::read_embedding_csv(sc_embedding);
            const auto rows = lab::scatter_dims(table, sc_i, sc_j);
            lab::write_scatter_csv(rows, sc_i, sc_j, sc_out);
            if (!sc_png.empty()) data::write_png(lab::plot_scatter(rows), sc_png);
            out << "wrote " << sc_out.string() << "\n";
        } else if (em->parsed()) {
            std::vector<data::Image> images;
            for (const auto& p : em_inputs) images.push_back(data::read_png(p));
            std::size_t cols = em_cols == 0 ? (em_rows == 0 ? images.size() : (images.size() + em_rows - 1) / em_rows)
                                            : em_cols;
            std::size_t rows = em_rows == 0 ? (images.size() + cols - 1) / cols : em_rows;
            data::write_png(lab::montage(images, rows, cols, em_border), em_out);
            out << "wrote " << em_out.string() << "\n";
        } else if (serve->parsed()) {
            if (!serve_centroids.empty()) serve_cfg.centroids = serve_centroids;
            InferenceService service(serve_cfg);
            const int port = service.bind();
            g_service = &service;
            std::signal(SIGINT, handle_signal);
            std::signal(SIGTERM, handle_signal);
            out << "serving " << service.session().checkpoint_id << " on http://" << serve_cfg.host << ":" << port
                << std::endl;
            service.run();
            g_service = nullptr;
        } else if (dec->parsed()) {
            const auto session = Session::load(dec_ckpt);
            write_bytes(dec_out, decode_to_png(session.model, parse_vector(dec_z)));
            out << "wrote " << dec_out.string() << "\n";
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int cli_main(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run_cli(args, std::cout, std::cerr);
}

}  // namespace bvae::app

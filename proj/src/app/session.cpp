#include "bridgevae/app/session.hpp"

#include <fstream>
#include <sstream>

#include "bridgevae/data/bridge.hpp"

namespace bvae::app {

namespace fs = std::filesystem;

Session Session::load(const fs::path& checkpoint_path, const std::optional<fs::path>& centroids_path) {
    std::ifstream in(checkpoint_path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + checkpoint_path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();
    const model::Checkpoint ckpt = model::parse_checkpoint(bytes);
    Session s{ckpt.profile, model::checkpoint_id(bytes), model::restore_model(ckpt), std::nullopt};

    fs::path cpath;
    if (centroids_path) {
        cpath = *centroids_path;
    } else {
        cpath = checkpoint_path.parent_path() / "centroids.json";
        if (!fs::exists(cpath)) cpath.clear();
    }
    if (!cpath.empty()) s.centroids = lab::read_centroids_json(cpath);
    return s;
}

lab::LatentVec Session::centroid(const std::string& subtype) const {
    if (!centroids) throw InvalidArgument("no centroid table loaded");
    const auto it = centroids->labels.find(subtype);
    if (it == centroids->labels.end()) throw InvalidArgument("no centroid for subtype '" + subtype + "'");
    if (it->second.size() != profile.latent_dim) {
        throw ShapeError("centroid for '" + subtype + "' has the wrong dimension");
    }
    return it->second;
}

std::string decode_to_png(const model::Vae<float>& model, const lab::LatentVec& z) {
    return data::encode_png(lab::decode_point(model, z));
}

data::Image fit_to_profile(const data::Image& image, const model::ArchitectureProfile& profile) {
    if (image.width == profile.width && image.height == profile.height) return image;
    if (image.width % profile.width == 0 && image.height % profile.height == 0 &&
        image.width / profile.width == image.height / profile.height) {
        return data::downsample(image, image.width / profile.width);
    }
    throw ShapeError("image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                     " cannot be mapped onto the model input " + std::to_string(profile.width) + "x" +
                     std::to_string(profile.height));
}

}  // namespace bvae::app

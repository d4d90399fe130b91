#include "bridgevae/model/profile.hpp"

namespace bvae::model {

ArchitectureProfile ArchitectureProfile::full() { return ArchitectureProfile{}; }

ArchitectureProfile ArchitectureProfile::desk() {
    ArchitectureProfile p;
    p.name = "desk";
    p.height = 64;
    p.width = 256;
    return p;
}

ArchitectureProfile ArchitectureProfile::by_name(const std::string& name) {
    if (name == "full") return full();
    if (name == "desk") return desk();
    throw InvalidArgument("unknown profile '" + name + "' (expected full or desk)");
}

std::size_t ArchitectureProfile::downsample() const {
    std::size_t f = 1;
    for (std::size_t i = 0; i < channels.size(); ++i) f *= stride;
    return f;
}

void ArchitectureProfile::validate() const {
    if (latent_dim < 1) throw InvalidArgument("latent_dim must be >= 1");
    if (channels.size() < 2) throw InvalidArgument("channel plan needs at least two stages");
    if (stride < 1 || kernel < 1) throw InvalidArgument("kernel and stride must be >= 1");
    const std::size_t f = downsample();
    if (height == 0 || width == 0 || height % f != 0 || width % f != 0) {
        throw InvalidArgument("image " + std::to_string(height) + "x" + std::to_string(width) +
                              " is not divisible by " + std::to_string(f) + " (" +
                              std::to_string(channels.size()) + " stride-" + std::to_string(stride) +
                              " stages)");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw InvalidArgument("dropout rate must lie in [0, 1)");
    }
}

bool ArchitectureProfile::operator==(const ArchitectureProfile& o) const {
    return name == o.name && height == o.height && width == o.width && latent_dim == o.latent_dim &&
           channels == o.channels && kernel == o.kernel && stride == o.stride &&
           dropout_rate == o.dropout_rate && batch_norm.epsilon == o.batch_norm.epsilon &&
           batch_norm.momentum == o.batch_norm.momentum;
}

void to_json(nlohmann::json& j, const ArchitectureProfile& p) {
    j = nlohmann::json{{"name", p.name},
                       {"height", p.height},
                       {"width", p.width},
                       {"latent_dim", p.latent_dim},
                       {"channels", p.channels},
                       {"kernel", p.kernel},
                       {"stride", p.stride},
                       {"dropout_rate", p.dropout_rate},
                       {"batch_norm_epsilon", p.batch_norm.epsilon},
                       {"batch_norm_momentum", p.batch_norm.momentum}};
}

void from_json(const nlohmann::json& j, ArchitectureProfile& p) {
    j.at("name").get_to(p.name);
    j.at("height").get_to(p.height);
    j.at("width").get_to(p.width);
    j.at("latent_dim").get_to(p.latent_dim);
    j.at("channels").get_to(p.channels);
    j.at("kernel").get_to(p.kernel);
    j.at("stride").get_to(p.stride);
    j.at("dropout_rate").get_to(p.dropout_rate);
    j.at("batch_norm_epsilon").get_to(p.batch_norm.epsilon);
    j.at("batch_norm_momentum").get_to(p.batch_norm.momentum);
}

}  // namespace bvae::model

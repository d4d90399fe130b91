#include "bridgevae/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace bvae::model {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr std::uint8_t kDtypeFloat32 = 1;

class Writer {
public:
    template <typename U>
    void put(U v) {
        char buf[sizeof(U)];
        std::memcpy(buf, &v, sizeof(U));
        out_.append(buf, sizeof(U));
    }
    void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(const std::string& in) : in_(in) {}

    template <typename U>
    U get(const char* what) {
        U v;
        raw(&v, sizeof(U), what);
        return v;
    }
    void raw(void* dst, std::size_t n, const char* what) {
        if (in_.size() - pos_ < n) {
            throw CheckpointError(CheckpointError::Kind::Truncated,
                                  std::string("checkpoint truncated while reading ") + what);
        }
        std::memcpy(dst, in_.data() + pos_, n);
        pos_ += n;
    }
    std::size_t remaining() const { return in_.size() - pos_; }

private:
    const std::string& in_;
    std::size_t pos_ = 0;
};

}  // namespace

const NamedArray* Checkpoint::find(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.name == name) return &a;
    return nullptr;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
    w.put<std::uint32_t>(kCheckpointVersion);
    const std::string header = nlohmann::json{{"profile", ckpt.profile}, {"metadata", ckpt.metadata}}.dump();
    w.put<std::uint64_t>(header.size());
    w.bytes(header.data(), header.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.arrays.size()));
    for (const auto& a : ckpt.arrays) {
        if (core::shape_size(a.shape) != a.data.size()) {
            throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                                  "array " + a.name + " data length disagrees with its shape");
        }
        w.put<std::uint32_t>(static_cast<std::uint32_t>(a.name.size()));
        w.bytes(a.name.data(), a.name.size());
        w.put<std::uint8_t>(kDtypeFloat32);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(a.shape.size()));
        for (auto d : a.shape) w.put<std::uint64_t>(d);
        w.bytes(a.data.data(), a.data.size() * sizeof(float));
    }
    return w.take();
}

Checkpoint parse_checkpoint(const std::string& bytes) {
    Reader r(bytes);
    char magic[sizeof(kCheckpointMagic)];
    if (bytes.size() < sizeof(magic)) {
        throw CheckpointError(CheckpointError::Kind::BadMagic, "not a checkpoint: file too short for magic");
    }
    r.raw(magic, sizeof(magic), "magic");
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw CheckpointError(CheckpointError::Kind::BadMagic, "not a checkpoint: bad magic bytes");
    }
    const auto version = r.get<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        throw CheckpointError(CheckpointError::Kind::UnsupportedVersion,
                              "unsupported checkpoint version " + std::to_string(version) + " (expected " +
                                  std::to_string(kCheckpointVersion) + ")");
    }
    const auto header_len = r.get<std::uint64_t>("header length");
    if (header_len > r.remaining()) {
        throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint truncated inside header");
    }
    std::string header(header_len, '\0');
    r.raw(header.data(), header_len, "header");

    Checkpoint ckpt;
    try {
        const auto j = nlohmann::json::parse(header);
        ckpt.profile = j.at("profile").get<ArchitectureProfile>();
        ckpt.metadata = j.at("metadata");
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(CheckpointError::Kind::Malformed, std::string("bad checkpoint header: ") + e.what());
    }

    const auto count = r.get<std::uint32_t>("array count");
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedArray a;
        const auto name_len = r.get<std::uint32_t>("array name length");
        if (name_len > r.remaining()) {
            throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint truncated inside array name");
        }
        a.name.resize(name_len);
        r.raw(a.name.data(), name_len, "array name");
        const auto dtype = r.get<std::uint8_t>("dtype");
        if (dtype != kDtypeFloat32) {
            throw CheckpointError(CheckpointError::Kind::Malformed,
                                  "array " + a.name + " has unsupported dtype " + std::to_string(dtype));
        }
        const auto rank = r.get<std::uint8_t>("rank");
        std::uint64_t n = 1;
        for (std::uint8_t d = 0; d < rank; ++d) {
            const auto dim = r.get<std::uint64_t>("dimension");
            a.shape.push_back(static_cast<std::size_t>(dim));
            n *= dim;
        }
        if (n * sizeof(float) > r.remaining()) {
            throw CheckpointError(CheckpointError::Kind::Truncated, "checkpoint truncated inside array " + a.name);
        }
        a.data.resize(n);
        r.raw(a.data.data(), n * sizeof(float), "array payload");
        ckpt.arrays.push_back(std::move(a));
    }
    if (r.remaining() != 0) {
        throw CheckpointError(CheckpointError::Kind::Malformed, "trailing bytes after last array");
    }
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const std::string bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_checkpoint(ss.str());
}

Checkpoint make_checkpoint(Vae<float>& model, nlohmann::json metadata) {
    Checkpoint ckpt;
    ckpt.profile = model.profile();
    ckpt.metadata = std::move(metadata);
    for (const auto* p : model.params()) {
        ckpt.arrays.push_back({p->name, p->value.shape(), p->value.storage()});
    }
    return ckpt;
}

Vae<float> restore_model(const Checkpoint& ckpt) {
    Vae<float> model(ckpt.profile);
    for (auto* p : model.params()) {
        const NamedArray* a = ckpt.find(p->name);
        if (!a) {
            throw CheckpointError(CheckpointError::Kind::MissingArray, "checkpoint lacks array " + p->name);
        }
        if (a->shape != p->value.shape()) {
            throw CheckpointError(CheckpointError::Kind::ShapeMismatch,
                                  "array " + p->name + " has shape " + core::shape_str(a->shape) +
                                      " but the profile expects " + core::shape_str(p->value.shape()));
        }
        p->value = core::Tensor<float>(a->shape, a->data);
    }
    model.mark_statistics_ready();
    return model;
}

std::string checkpoint_id(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace bvae::model

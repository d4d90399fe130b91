#pragma once

// Versioned binary checkpoint container. Layout (all integers little-endian):
//
//   magic    8 bytes  "BVAECKPT"
//   version  u32      kCheckpointVersion
//   hdr_len  u64      length of the JSON header that follows
//   header   hdr_len  UTF-8 JSON {"profile": {...}, "metadata": {...}}
//   count    u32      number of arrays
//   count x { name_len u32, name bytes, dtype u8 (1 = float32), rank u8,
//             rank x u64 dims, row-major float32 payload }
//
// See docs/checkpoint_format.md for the field-level description.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bridgevae/model/vae.hpp"

namespace bvae::model {

inline constexpr char kCheckpointMagic[8] = {'B', 'V', 'A', 'E', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
    std::string name;
    Shape shape;
    std::vector<float> data;

    bool operator==(const NamedArray&) const = default;
};

struct Checkpoint {
    ArchitectureProfile profile;
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<NamedArray> arrays;

    const NamedArray* find(const std::string& name) const;
};

class CheckpointError : public Error {
public:
    enum class Kind { BadMagic, UnsupportedVersion, Truncated, Malformed, ShapeMismatch, MissingArray };

    CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& bytes);

/// Snapshot of every parameter (including batch-norm moving statistics).
Checkpoint make_checkpoint(Vae<float>& model, nlohmann::json metadata = nlohmann::json::object());

/// Rebuilds a model; every parameter must be present with the expected shape.
Vae<float> restore_model(const Checkpoint& ckpt);

/// Stable identifier: FNV-1a 64 over the serialized bytes, as 16 hex digits.
std::string checkpoint_id(const std::string& bytes);

}  // namespace bvae::model

#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>

#include "bridgevae/data/image.hpp"

namespace bvae::data {

/// The eight bridge subtypes; numeric values are the dataset label ids.
enum class Subtype : int {
    ArchBottomBear = 0,
    ArchTopBear = 1,
    BeamThreeSpan = 2,
    BeamVType = 3,
    CableFanShaped = 4,
    CableHarpShaped = 5,
    SuspensionDiagonalSling = 6,
    SuspensionVerticalSling = 7,
};

inline constexpr std::size_t kSubtypeCount = 8;
inline constexpr std::size_t kFramesPerSubtype = 16;
inline constexpr std::size_t kCanvasWidth = 512;
inline constexpr std::size_t kCanvasHeight = 128;

inline constexpr std::array<Subtype, kSubtypeCount> kAllSubtypes{
    Subtype::ArchBottomBear,  Subtype::ArchTopBear,     Subtype::BeamThreeSpan,           Subtype::BeamVType,
    Subtype::CableFanShaped,  Subtype::CableHarpShaped, Subtype::SuspensionDiagonalSling, Subtype::SuspensionVerticalSling};

std::string_view subtype_name(Subtype s);
Subtype subtype_from_name(std::string_view name);
Subtype subtype_from_label(int label);
inline int label_of(Subtype s) { return static_cast<int>(s); }

/// name -> label id, e.g. {"Arch Bottom_bear": 0, ...}.
std::map<std::string, int> label_dictionary();

/// The member whose width is animated across the 16 frames, in meters.
struct AnimatedMember {
    std::string_view member;
    double min_width;
    double max_width;
};
AnimatedMember animated_member(Subtype s);

/// Span layout in meters (three spans, total 300 m).
std::array<double, 3> span_layout(Subtype s);

/// World-to-canvas mapping: a 330 m window (300 m bridge plus 15 m margins)
/// across 512 px, deck top on pixel row 88.
struct CanvasGeometry {
    std::size_t width = kCanvasWidth;
    std::size_t height = kCanvasHeight;
    double meters_per_pixel = 330.0 / 512.0;
    double left_margin_m = 15.0;
    double deck_row = 88.0;
};

struct BridgeRenderSpec {
    Subtype subtype = Subtype::BeamThreeSpan;
    int frame = 0;
    double member_width = 1.0;
    CanvasGeometry canvas{};

    /// Spec for a frame with member width interpolated linearly from
    /// min (frame 0) to max (frame 15).
    static BridgeRenderSpec for_frame(Subtype s, int frame);
};

/// Draws the facade silhouette: white members on black, anti-aliased by
/// 8x8 supersampling. Deterministic.
Image render_bridge(const BridgeRenderSpec& spec);

/// The 16 animation frames of one subtype.
std::array<Image, kFramesPerSubtype> animate_frames(Subtype s);

/// Pixel row through the deck slab (used for continuity checks).
std::size_t deck_row(const CanvasGeometry& g = {});

}  // namespace bvae::data

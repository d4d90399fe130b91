#include "bridgevae/data/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace bvae::data {

namespace {

constexpr std::array<std::string_view, kSubtypeCount> kNames{
    "Arch Bottom_bear",  "Arch Top_bear",     "Beam Three_span",           "Beam V_type",
    "Cable Fan_shaped",  "Cable Harp_shaped", "Suspension Diagonal_sling", "Suspension Vertical_sling"};

constexpr int kSupersample = 8;
constexpr double kBridgeLength = 300.0;
constexpr double kGround = -40.0;  // below the canvas; piers run off the bottom edge
constexpr double kDeckDepth = 1.5;

struct Rect {
    double x0, x1, y0, y1;
};

struct Capsule {
    double ax, ay, bx, by, radius;
};

// Drawing in meter space: x along the bridge from its left end, y up from the deck top.
class Sketch {
public:
    void rect(double x0, double x1, double y0, double y1) {
        rects_.push_back({std::min(x0, x1), std::max(x0, x1), std::min(y0, y1), std::max(y0, y1)});
    }
    void line(double ax, double ay, double bx, double by, double width) {
        capsules_.push_back({ax, ay, bx, by, width / 2.0});
    }
    template <typename F>
    void curve(double x0, double x1, F&& y_of_x, double width, int segments = 64) {
        for (int i = 0; i < segments; ++i) {
            const double xa = x0 + (x1 - x0) * i / segments;
            const double xb = x0 + (x1 - x0) * (i + 1) / segments;
            line(xa, y_of_x(xa), xb, y_of_x(xb), width);
        }
    }

    Image rasterize(const CanvasGeometry& g) const {
        const std::size_t sw = g.width * kSupersample, sh = g.height * kSupersample;
        std::vector<unsigned char> mask(sw * sh, 0);
        const double sub = g.meters_per_pixel / kSupersample;
        // Subsample (i, j) center in meters.
        const auto x_of = [&](std::size_t i) { return (static_cast<double>(i) + 0.5) * sub - g.left_margin_m; };
        const auto y_of = [&](std::size_t j) {
            return (g.deck_row * kSupersample - (static_cast<double>(j) + 0.5)) * sub;
        };
        const auto col_range = [&](double x0, double x1) {
            const double lo = std::floor((x0 + g.left_margin_m) / sub - 0.5);
            const double hi = std::ceil((x1 + g.left_margin_m) / sub - 0.5);
            return std::pair<std::size_t, std::size_t>(
                static_cast<std::size_t>(std::clamp(lo, 0.0, static_cast<double>(sw))),
                static_cast<std::size_t>(std::clamp(hi + 1.0, 0.0, static_cast<double>(sw))));
        };
        const auto row_range = [&](double y0, double y1) {
            const double lo = std::floor(g.deck_row * kSupersample - y1 / sub - 0.5);
            const double hi = std::ceil(g.deck_row * kSupersample - y0 / sub - 0.5);
            return std::pair<std::size_t, std::size_t>(
                static_cast<std::size_t>(std::clamp(lo, 0.0, static_cast<double>(sh))),
                static_cast<std::size_t>(std::clamp(hi + 1.0, 0.0, static_cast<double>(sh))));
        };

        for (const auto& r : rects_) {
            const auto [c0, c1] = col_range(r.x0, r.x1);
            const auto [r0, r1] = row_range(r.y0, r.y1);
            for (std::size_t j = r0; j < r1; ++j) {
                const double y = y_of(j);
                if (y < r.y0 || y > r.y1) continue;
                for (std::size_t i = c0; i < c1; ++i) {
                    const double x = x_of(i);
                    if (x >= r.x0 && x <= r.x1) mask[j * sw + i] = 1;
                }
            }
        }
        for (const auto& c : capsules_) {
            const auto [c0, c1] = col_range(std::min(c.ax, c.bx) - c.radius, std::max(c.ax, c.bx) + c.radius);
            const auto [r0, r1] = row_range(std::min(c.ay, c.by) - c.radius, std::max(c.ay, c.by) + c.radius);
            const double dx = c.bx - c.ax, dy = c.by - c.ay;
            const double len2 = dx * dx + dy * dy;
            const double r2 = c.radius * c.radius;
            for (std::size_t j = r0; j < r1; ++j) {
                const double y = y_of(j);
                for (std::size_t i = c0; i < c1; ++i) {
                    const double x = x_of(i);
                    double t = len2 > 0.0 ? ((x - c.ax) * dx + (y - c.ay) * dy) / len2 : 0.0;
                    t = std::clamp(t, 0.0, 1.0);
                    const double ex = x - (c.ax + t * dx), ey = y - (c.ay + t * dy);
                    if (ex * ex + ey * ey <= r2) mask[j * sw + i] = 1;
                }
            }
        }

        Image out(g.width, g.height);
        constexpr float inv = 1.0f / (kSupersample * kSupersample);
        for (std::size_t y = 0; y < g.height; ++y)
            for (std::size_t x = 0; x < g.width; ++x) {
                int hits = 0;
                for (int dy = 0; dy < kSupersample; ++dy)
                    for (int dx = 0; dx < kSupersample; ++dx)
                        hits += mask[(y * kSupersample + dy) * sw + x * kSupersample + dx];
                out.at(x, y) = static_cast<float>(hits) * inv;
            }
        return out;
    }

private:
    std::vector<Rect> rects_;
    std::vector<Capsule> capsules_;
};

void pier(Sketch& s, double x, double top, double width = 3.0) { s.rect(x - width / 2, x + width / 2, kGround, top); }

void end_piers(Sketch& s, double top) {
    pier(s, 1.5, top);
    pier(s, kBridgeLength - 1.5, top);
}

void draw_beam(Sketch& s, double depth) {
    s.rect(0.0, kBridgeLength, -depth, 0.0);
    pier(s, 80.0, -depth);
    pier(s, 220.0, -depth);
    end_piers(s, -depth);
}

void draw_v_pier(Sketch& s, double depth) {
    s.rect(0.0, kBridgeLength, -depth, 0.0);
    for (double x : {80.0, 220.0}) {
        constexpr double node = -14.0;
        s.line(x - 18.0, -depth, x, node, 2.5);
        s.line(x + 18.0, -depth, x, node, 2.5);
        pier(s, x, node);
    }
    end_piers(s, -depth);
}

// Deck arch: the rib lies under the deck and carries it on spandrel columns.
void draw_deck_arch(Sketch& s, double rib) {
    const double left = 67.0, right = 233.0, mid = 150.0, half = 83.0;
    const double springing = -25.0;
    const double crown = -kDeckDepth - rib / 2.0;
    const auto arch_y = [&](double x) {
        const double u = (x - mid) / half;
        return springing + (crown - springing) * (1.0 - u * u);
    };
    s.rect(0.0, kBridgeLength, -kDeckDepth, 0.0);
    s.curve(left, right, arch_y, rib);
    for (int k = 1; k < 14; ++k) {
        const double x = left + half * 2.0 * k / 14.0;
        const double top_of_rib = arch_y(x) + rib / 2.0;
        if (top_of_rib < -kDeckDepth - 0.5) s.line(x, top_of_rib, x, -kDeckDepth, 1.0);
    }
    pier(s, left, -kDeckDepth);
    pier(s, right, -kDeckDepth);
    end_piers(s, -kDeckDepth);
}

// Through arch: the rib rises above the deck, which hangs from vertical hangers.
void draw_through_arch(Sketch& s, double rib) {
    const double left = 67.0, right = 233.0, mid = 150.0, half = 83.0, rise = 45.0;
    const auto arch_y = [&](double x) {
        const double u = (x - mid) / half;
        return rise * (1.0 - u * u);
    };
    s.rect(0.0, kBridgeLength, -kDeckDepth, 0.0);
    s.curve(left, right, arch_y, rib);
    for (int k = 1; k < 14; ++k) {
        const double x = left + half * 2.0 * k / 14.0;
        s.line(x, 0.0, x, arch_y(x), 1.0);
    }
    pier(s, left, -kDeckDepth);
    pier(s, right, -kDeckDepth);
    end_piers(s, -kDeckDepth);
}

void draw_cable_stayed(Sketch& s, double tower, bool fan) {
    constexpr double tower_top = 50.0;
    const double stay = std::max(1.0, tower * 0.3);
    s.rect(0.0, kBridgeLength, -kDeckDepth, 0.0);
    for (double x : {67.0, 233.0}) {
        s.rect(x - tower / 2, x + tower / 2, kGround, tower_top);
        for (int i = 0; i < 6; ++i) {
            double anchor_h, offset;
            if (fan) {
                anchor_h = 44.0 + 0.8 * i;
                offset = 10.0 + 10.4 * i;
            } else {
                anchor_h = 14.0 + 5.5 * i;
                offset = anchor_h * 1.45;
            }
            s.line(x, anchor_h, x - offset, 0.0, stay);
            s.line(x, anchor_h, x + offset, 0.0, stay);
        }
    }
    end_piers(s, -kDeckDepth);
}

void draw_suspension(Sketch& s, double cable, bool diagonal) {
    constexpr double left = 67.0, right = 233.0, mid = 150.0, half = 83.0;
    constexpr double tower_top = 55.0, sag_low = 4.0;
    const double hanger = std::max(1.0, cable * 0.5);
    const auto main_y = [&](double x) {
        const double u = (x - mid) / half;
        return sag_low + (tower_top - sag_low) * u * u;
    };
    const auto side_y = [&](double x) {
        // straight back-stay from tower top to the deck end
        const double t = x < mid ? (left - x) / left : (x - right) / (kBridgeLength - right);
        return tower_top + (1.0 - tower_top) * t;
    };
    s.rect(0.0, kBridgeLength, -kDeckDepth, 0.0);
    for (double x : {left, right}) s.rect(x - 1.5, x + 1.5, kGround, tower_top + 2.0);
    s.curve(left, right, main_y, cable);
    s.line(left, tower_top, 0.0, 1.0, cable);
    s.line(right, tower_top, kBridgeLength, 1.0, cable);

    for (int k = 1; k < 16; ++k) {
        const double x = left + 2.0 * half * k / 16.0;
        if (diagonal) {
            const double lean = (k % 2 == 0) ? 5.0 : -5.0;
            s.line(x, 0.0, x + lean, main_y(x + lean), hanger);
        } else {
            s.line(x, 0.0, x, main_y(x), hanger);
        }
    }
    for (int k = 1; k < 5; ++k) {
        for (double x : {left - 13.0 * k, right + 13.0 * k}) {
            if (diagonal) {
                const double lean = (k % 2 == 0) ? 4.0 : -4.0;
                s.line(x, 0.0, x + lean, side_y(x + lean), hanger);
            } else {
                s.line(x, 0.0, x, side_y(x), hanger);
            }
        }
    }
    end_piers(s, -kDeckDepth);
}

}  // namespace

std::string_view subtype_name(Subtype s) {
    const auto i = static_cast<std::size_t>(s);
    if (i >= kSubtypeCount) throw InvalidArgument("unknown subtype id " + std::to_string(i));
    return kNames[i];
}

Subtype subtype_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kSubtypeCount; ++i)
        if (kNames[i] == name) return static_cast<Subtype>(i);
    throw InvalidArgument("unknown subtype '" + std::string(name) + "'");
}

Subtype subtype_from_label(int label) {
    if (label < 0 || label >= static_cast<int>(kSubtypeCount)) {
        throw InvalidArgument("unknown subtype label " + std::to_string(label));
    }
    return static_cast<Subtype>(label);
}

std::map<std::string, int> label_dictionary() {
    std::map<std::string, int> out;
    for (std::size_t i = 0; i < kSubtypeCount; ++i) out.emplace(std::string(kNames[i]), static_cast<int>(i));
    return out;
}

AnimatedMember animated_member(Subtype s) {
    switch (s) {
        case Subtype::BeamThreeSpan:
        case Subtype::BeamVType:
            return {"girder depth", 1.0, 4.0};
        case Subtype::ArchBottomBear:
        case Subtype::ArchTopBear:
            return {"rib thickness", 1.5, 4.0};
        case Subtype::CableFanShaped:
        case Subtype::CableHarpShaped:
            return {"tower width", 2.0, 5.0};
        case Subtype::SuspensionDiagonalSling:
        case Subtype::SuspensionVerticalSling:
            return {"main cable width", 1.0, 2.5};
    }
    throw InvalidArgument("unknown subtype");
}

std::array<double, 3> span_layout(Subtype s) {
    if (s == Subtype::BeamThreeSpan || s == Subtype::BeamVType) return {80.0, 140.0, 80.0};
    return {67.0, 166.0, 67.0};
}

BridgeRenderSpec BridgeRenderSpec::for_frame(Subtype s, int frame) {
    if (frame < 0 || frame >= static_cast<int>(kFramesPerSubtype)) {
        throw InvalidArgument("frame " + std::to_string(frame) + " outside [0, 16)");
    }
    const auto m = animated_member(s);
    BridgeRenderSpec spec;
    spec.subtype = s;
    spec.frame = frame;
    spec.member_width = m.min_width + (m.max_width - m.min_width) * frame / (kFramesPerSubtype - 1.0);
    return spec;
}

Image render_bridge(const BridgeRenderSpec& spec) {
    const auto m = animated_member(spec.subtype);
    if (spec.member_width < m.min_width - 1e-9 || spec.member_width > m.max_width + 1e-9) {
        throw InvalidArgument("member width outside the subtype's range");
    }
    Sketch s;
    const double w = spec.member_width;
    switch (spec.subtype) {
        case Subtype::BeamThreeSpan: draw_beam(s, w); break;
        case Subtype::BeamVType: draw_v_pier(s, w); break;
        case Subtype::ArchTopBear: draw_deck_arch(s, w); break;
        case Subtype::ArchBottomBear: draw_through_arch(s, w); break;
        case Subtype::CableHarpShaped: draw_cable_stayed(s, w, false); break;
        case Subtype::CableFanShaped: draw_cable_stayed(s, w, true); break;
        case Subtype::SuspensionVerticalSling: draw_suspension(s, w, false); break;
        case Subtype::SuspensionDiagonalSling: draw_suspension(s, w, true); break;
        default: throw InvalidArgument("unknown subtype");
    }
    return s.rasterize(spec.canvas);
}

std::array<Image, kFramesPerSubtype> animate_frames(Subtype s) {
    std::array<Image, kFramesPerSubtype> frames;
    for (std::size_t k = 0; k < kFramesPerSubtype; ++k) {
        frames[k] = render_bridge(BridgeRenderSpec::for_frame(s, static_cast<int>(k)));
    }
    return frames;
}

std::size_t deck_row(const CanvasGeometry& g) { return static_cast<std::size_t>(g.deck_row); }

}  // namespace bvae::data

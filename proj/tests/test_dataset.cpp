#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "bridgevae/data/dataset.hpp"
#include "support.hpp"

using namespace bvae;
using namespace bvae::data;

namespace {

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double column_mass(const Image& im, std::size_t x) {
    double s = 0.0;
    for (std::size_t y = 0; y < im.height; ++y) s += im.at(x, y);
    return s;
}

double total_mass(const Image& im) {
    double s = 0.0;
    for (float v : im.pixels) s += v;
    return s;
}

const std::map<std::string, int> kExpectedDictionary{
    {"Arch Bottom_bear", 0},          {"Arch Top_bear", 1},           {"Beam Three_span", 2},
    {"Beam V_type", 3},               {"Cable Fan_shaped", 4},        {"Cable Harp_shaped", 5},
    {"Suspension Diagonal_sling", 6}, {"Suspension Vertical_sling", 7}};

}  // namespace

TEST_CASE("label dictionary and subtype names") {
    CHECK(label_dictionary() == kExpectedDictionary);
    for (const auto& [name, id] : kExpectedDictionary) {
        CHECK(label_of(subtype_from_name(name)) == id);
        CHECK(subtype_name(subtype_from_label(id)) == name);
    }
    CHECK_THROWS_AS(subtype_from_name("Truss"), InvalidArgument);
    CHECK_THROWS_AS(subtype_from_label(8), InvalidArgument);
}

TEST_CASE("renders are 512x128, bounded and deterministic") {
    for (Subtype s : kAllSubtypes) {
        for (int frame : {0, 7, 15}) {
            const auto spec = BridgeRenderSpec::for_frame(s, frame);
            const Image a = render_bridge(spec);
            CHECK(a.width == 512);
            CHECK(a.height == 128);
            for (float v : a.pixels) REQUIRE((v >= 0.0f && v <= 1.0f));
            CHECK(render_bridge(spec) == a);
        }
    }
    CHECK_THROWS_AS(BridgeRenderSpec::for_frame(Subtype::BeamThreeSpan, 16), InvalidArgument);
}

TEST_CASE("mean white-pixel count of the base renders is plausible") {
    std::size_t total = 0, n = 0;
    for (Subtype s : kAllSubtypes) {
        for (const Image& im : animate_frames(s)) {
            total += count_above(im, 0.5f);
            ++n;
        }
    }
    CHECK(n == 128);
    const double mean = static_cast<double>(total) / static_cast<double>(n);
    MESSAGE("mean white pixels per base render: " << mean);
    CHECK(mean >= 1500.0);
    CHECK(mean <= 6000.0);
}

TEST_CASE("beam girder depth grows from 1 m to 4 m") {
    const auto first = BridgeRenderSpec::for_frame(Subtype::BeamThreeSpan, 0);
    const auto last = BridgeRenderSpec::for_frame(Subtype::BeamThreeSpan, 15);
    CHECK(first.member_width == doctest::Approx(1.0));
    CHECK(last.member_width == doctest::Approx(4.0));

    // Mid-span of the first span, clear of every pier.
    const CanvasGeometry g;
    const auto x = static_cast<std::size_t>((g.left_margin_m + 40.0) / g.meters_per_pixel);
    const double px0 = column_mass(render_bridge(first), x) * g.meters_per_pixel;
    const double px15 = column_mass(render_bridge(last), x) * g.meters_per_pixel;
    CHECK(std::abs(px0 - 1.0) < 0.3 * g.meters_per_pixel);
    CHECK(std::abs(px15 - 4.0) < 0.3 * g.meters_per_pixel);
}

TEST_CASE("animation frames are distinct and the beam grows monotonically") {
    for (Subtype s : kAllSubtypes) {
        const auto frames = animate_frames(s);
        for (std::size_t i = 0; i < frames.size(); ++i)
            for (std::size_t j = i + 1; j < frames.size(); ++j) CHECK(frames[i] != frames[j]);
    }
    const auto beam = animate_frames(Subtype::BeamThreeSpan);
    for (std::size_t k = 1; k < beam.size(); ++k) {
        CHECK(count_above(beam[k], 0.5f) >= count_above(beam[k - 1], 0.5f));
    }
}

TEST_CASE("every subtype has a continuous deck and black corners") {
    const CanvasGeometry g;
    const auto x0 = static_cast<std::size_t>(std::ceil(g.left_margin_m / g.meters_per_pixel));
    const auto x1 = static_cast<std::size_t>((g.left_margin_m + 300.0) / g.meters_per_pixel);
    for (Subtype s : kAllSubtypes) {
        for (int frame : {0, 15}) {
            const Image im = render_bridge(BridgeRenderSpec::for_frame(s, frame));
            INFO(subtype_name(s), " frame ", frame);
            std::size_t gaps = 0;
            for (std::size_t x = x0; x < x1; ++x) gaps += im.at(x, deck_row(g)) <= 0.5f;
            CHECK(gaps == 0);
            CHECK(im.at(0, 0) == 0.0f);
            CHECK(im.at(511, 0) == 0.0f);
            CHECK(im.at(0, 127) == 0.0f);
            CHECK(im.at(511, 127) == 0.0f);
        }
    }
}

TEST_CASE("identity augmentation is bit-exact") {
    const Image base = render_bridge(BridgeRenderSpec::for_frame(Subtype::CableFanShaped, 6));
    CHECK(augment(base, {}) == base);
}

TEST_CASE("vertical scale 1.1 thickens a horizontal bar by about 10 percent") {
    Image bar(512, 128);
    for (std::size_t y = 54; y < 74; ++y)
        for (std::size_t x = 100; x < 400; ++x) bar.at(x, y) = 1.0f;
    const Image out = augment(bar, {0.0, 1.0, 1.1});
    const double before = column_mass(bar, 256);
    const double after = column_mass(out, 256);
    CHECK(std::abs(after - before * 1.1) <= 1.0);
    std::size_t rows = 0;
    for (std::size_t y = 0; y < 128; ++y) rows += out.at(256, y) > 0.5f;
    CHECK(std::abs(static_cast<double>(rows) - 22.0) <= 1.0);
}

TEST_CASE("small rotations preserve total intensity") {
    const Image base = render_bridge(BridgeRenderSpec::for_frame(Subtype::BeamVType, 8));
    const double m0 = total_mass(base);
    for (double deg : {-0.3, 0.3}) {
        const double m1 = total_mass(augment(base, {deg, 1.0, 1.0}));
        CHECK(std::abs(m1 - m0) / m0 < 0.02);
    }
}

TEST_CASE("augmentation grid has 75 combinations in canonical order") {
    const auto grid = augmentation_grid();
    REQUIRE(grid.size() == 75);
    CHECK(grid.front() == AugmentParams{-0.3, 1.0, 1.0});
    CHECK(grid[1] == AugmentParams{-0.3, 1.0, 1.025});
    CHECK(grid[5].hscale == doctest::Approx(1.0125));
    CHECK(grid.back().rotation_deg == doctest::Approx(0.3));
    CHECK(grid.back().hscale == doctest::Approx(1.05));
    CHECK(grid.back().vscale == doctest::Approx(1.1));
}

TEST_CASE("png round trip is within one quantization step") {
    testing::Rng rng(17);
    Image im(37, 11);
    for (auto& v : im.pixels) v = static_cast<float>(rng.uniform());
    const Image back = decode_png(encode_png(im));
    REQUIRE(back.width == 37);
    REQUIRE(back.height == 11);
    for (std::size_t i = 0; i < im.pixels.size(); ++i) CHECK(std::abs(back.pixels[i] - im.pixels[i]) <= 1.0f / 255.0f);
    CHECK(encode_png(im) == encode_png(im));
    CHECK_THROWS_AS(decode_png("not a png"), IoError);
}

TEST_CASE("downsampling averages blocks") {
    Image im(4, 2);
    im.pixels = {1, 0, 1, 1, 0, 0, 1, 1};
    const Image d = downsample(im, 2);
    REQUIRE(d.width == 2);
    CHECK(d.pixels[0] == doctest::Approx(0.25));
    CHECK(d.pixels[1] == doctest::Approx(1.0));
}

TEST_CASE("manifest plan has 1200 entries per subtype") {
    const auto m = plan_dataset(7);
    CHECK(m.entries.size() == 9600);
    CHECK(m.label_dictionary == kExpectedDictionary);
    std::map<int, std::size_t> per_label;
    for (const auto& e : m.entries) {
        ++per_label[e.label];
        CHECK(kExpectedDictionary.at(e.subtype) == e.label);
    }
    for (const auto& [label, n] : per_label) CHECK(n == 1200);
    CHECK(entry_path(Subtype::BeamThreeSpan, 3, {-0.3, 1.0125, 1.05}) == "Beam Three_span/03_-0.3_1.0125_1.050.png");
}

TEST_CASE("split_entries draws disjoint per-class subsets") {
    const auto m = plan_dataset(0);
    const auto split = split_entries(m, {1, 2}, 100, 25, 5);
    CHECK(split.train.size() == 200);
    CHECK(split.holdout.size() == 50);
    std::set<std::size_t> seen(split.train.begin(), split.train.end());
    for (auto i : split.holdout) CHECK(seen.insert(i).second);
    for (auto i : seen) CHECK((m.entries[i].label == 1 || m.entries[i].label == 2));
    CHECK(split_entries(m, {1, 2}, 100, 25, 5).train == split.train);
    CHECK_THROWS_AS(split_entries(m, {1}, 1200, 1, 0), InvalidArgument);
}

TEST_CASE("building twice gives identical bytes and loading reports bad entries") {
    testing::TempDir a("ds_a"), b("ds_b");
    const auto m1 = build_dataset(a.path(), 7, {1, {}});
    const auto m2 = build_dataset(b.path(), 7, {2, {}});
    CHECK(m1 == m2);
    CHECK(file_bytes(a.path() / "manifest.json") == file_bytes(b.path() / "manifest.json"));
    std::size_t files = 0, mismatches = 0;
    for (const auto& e : m1.entries) {
        ++files;
        mismatches += file_bytes(a.path() / e.path) != file_bytes(b.path() / e.path);
    }
    CHECK(files == 9600);
    CHECK(mismatches == 0);

    const auto m = read_manifest(a.path() / "manifest.json");
    CHECK(m == m1);
    const auto loaded = load_dataset(m, {0, 1200, 9599});
    CHECK(loaded.images.shape() == core::Shape{3, 128, 512, 1});
    CHECK(loaded.labels == std::vector<int>{0, 1, 7});
    const auto small = load_dataset(m, {5}, 2);
    CHECK(small.images.shape() == core::Shape{1, 64, 256, 1});

    const Image direct = augment(render_bridge(BridgeRenderSpec::for_frame(Subtype::ArchTopBear, 0)),
                                 m.entries[1200].augment);
    const Image stored = image_from_tensor(loaded.images, 1);
    for (std::size_t i = 0; i < direct.pixels.size(); ++i) {
        REQUIRE(std::abs(direct.pixels[i] - stored.pixels[i]) <= 0.5f / 255.0f + 1e-6f);
    }

    std::filesystem::remove(a.path() / m.entries[42].path);
    try {
        load_dataset(m, {42});
        FAIL("expected an error");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find(m.entries[42].path) != std::string::npos);
    }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <numeric>
#include <set>

#include "bridgevae/data/dataset.hpp"
#include "bridgevae/lab/latent_lab.hpp"
#include "support.hpp"

using namespace bvae;
using namespace bvae::lab;
using data::Image;

namespace {

EmbeddingTable random_table(std::size_t n, std::size_t dim, int labels, std::uint64_t seed) {
    testing::Rng rng(seed);
    EmbeddingTable t{"test", dim, {}};
    for (std::size_t i = 0; i < n; ++i) {
        LatentVec z(dim);
        for (auto& v : z) v = rng.normal();
        t.rows.push_back({i, static_cast<int>(i % static_cast<std::size_t>(labels)), std::move(z)});
    }
    return t;
}

model::Vae<float> random_desk_model(std::uint64_t seed) {
    model::Vae<float> m(model::ArchitectureProfile::desk());
    m.init(seed);
    m.mark_statistics_ready();
    return m;
}

core::Tensor<float> random_images(std::size_t n, std::size_t h, std::size_t w, std::uint64_t seed) {
    testing::Rng rng(seed);
    core::Tensor<float> t({n, h, w, 1});
    for (auto& v : t.values()) v = static_cast<float>(rng.uniform());
    return t;
}

Image solid(std::size_t w, std::size_t h, float v) { return Image(w, h, v); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::size_t csv_data_rows(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) n += !line.empty();
    return n - 1;
}

}  // namespace

TEST_CASE("centroids match a brute-force mean") {
    const auto table = random_table(203, 8, 8, 11);
    const auto c = centroids(table);
    REQUIRE(c.size() == 8);
    for (int label = 0; label < 8; ++label) {
        LatentVec sum(8, 0.0);
        std::size_t n = 0;
        for (const auto& r : table.rows) {
            if (r.label != label) continue;
            for (std::size_t d = 0; d < 8; ++d) sum[d] += r.z[d];
            ++n;
        }
        for (std::size_t d = 0; d < 8; ++d) CHECK(std::abs(c.at(label)[d] - sum[d] / n) < 1e-9);
    }

    auto shuffled = table;
    testing::Rng rng(4);
    rng.shuffle(shuffled.rows.begin(), shuffled.rows.end());
    const auto c2 = centroids(shuffled);
    for (const auto& [label, z] : c)
        for (std::size_t d = 0; d < 8; ++d) CHECK(std::abs(c2.at(label)[d] - z[d]) < 1e-12);

    const auto some = centroids(table, {2, 5});
    CHECK(some.size() == 2);
    CHECK(some.count(2) == 1);
}

TEST_CASE("centroid of one point is the point and of two is the midpoint") {
    EmbeddingTable t{"x", 2, {{0, 3, {1.0, -2.0}}}};
    CHECK(centroids(t).at(3) == LatentVec{1.0, -2.0});
    t.rows.push_back({1, 3, {3.0, 4.0}});
    CHECK(centroids(t).at(3) == LatentVec{2.0, 1.0});
}

TEST_CASE("centroid errors") {
    EmbeddingTable empty{"x", 8, {}};
    CHECK_THROWS_AS(centroids(empty), InvalidArgument);
    const auto t = random_table(10, 8, 2, 1);
    CHECK_THROWS_AS(centroids(t, {0, 6}), InvalidArgument);
    auto bad = t;
    bad.rows[2].z.pop_back();
    CHECK_THROWS_AS(centroids(bad), ShapeError);
}

TEST_CASE("interpolation hits both endpoints exactly and is affine in between") {
    const LatentVec a{0.1, -3.3, 7.0}, b{2.9, 0.7, -1.0 / 3.0};
    const auto pts = interpolate(a, b, 11);
    REQUIRE(pts.size() == 11);
    CHECK(pts.front() == a);
    CHECK(pts.back() == b);
    for (std::size_t k = 0; k < 11; ++k) {
        const double t = k / 10.0;
        for (std::size_t d = 0; d < 3; ++d) CHECK(std::abs(pts[k][d] - ((1 - t) * a[d] + t * b[d])) < 1e-12);
    }
    CHECK(interpolate(a, b, 2).size() == 2);
    CHECK_THROWS_AS(interpolate(a, b, 1), InvalidArgument);
    CHECK_THROWS_AS(interpolate(a, b, 0), InvalidArgument);
    CHECK_THROWS_AS(interpolate(a, LatentVec{1.0}, 5), ShapeError);
}

TEST_CASE("morph frames decode the interpolated points") {
    const auto model = random_desk_model(21);
    testing::Rng rng(8);
    LatentVec a(8), b(8);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = rng.normal();

    const auto two = morph(model, a, b, 2);
    REQUIRE(two.frames.size() == 2);
    CHECK(two.frames[0] == decode_point(model, a));
    CHECK(two.frames[1] == decode_point(model, b));
    CHECK(two.frames[0].width == 256);
    CHECK(two.frames[0].height == 64);

    const auto same = morph(model, a, a, 5);
    for (const auto& f : same.frames) CHECK(f == same.frames.front());

    const auto track = morph(model, a, b, kDefaultMorphSteps);
    CHECK(track.frames.size() == 11);
    CHECK(track.frames[5] == decode_point(model, track.points[5]));

    CHECK_THROWS_AS(decode_point(model, LatentVec(7)), ShapeError);
    LatentVec nan_z(8, 0.0);
    nan_z[3] = std::nan("");
    CHECK_THROWS_AS(decode_point(model, nan_z), InvalidArgument);
}

TEST_CASE("there are 28 subtype pairs") {
    const auto pairs = subtype_pairs();
    CHECK(pairs.size() == 28);
    std::set<std::pair<int, int>> seen(pairs.begin(), pairs.end());
    CHECK(seen.size() == 28);
    for (auto [i, j] : pairs) {
        CHECK(i < j);
        CHECK(i >= 0);
        CHECK(j < 8);
    }
}

TEST_CASE("boundary grid covers every sign corner") {
    for (double m : {100.0, 5.0, 4.0, 3.0}) {
        const auto grid = boundary_grid(m);
        REQUIRE(grid.size() == 256);
        std::set<LatentVec> distinct(grid.begin(), grid.end());
        CHECK(distinct.size() == 256);
        for (const auto& z : grid) {
            REQUIRE(z.size() == 8);
            for (double v : z) CHECK(std::abs(v) == m);
        }
        CHECK(grid.front() == LatentVec(8, -m));
        CHECK(grid.back() == LatentVec(8, m));
        LatentVec second(8, -m);
        second[7] = m;
        CHECK(grid[1] == second);
    }
    CHECK(boundary_grid(1.0, 3).size() == 8);
    CHECK_THROWS_AS(boundary_grid(0.0), InvalidArgument);
    CHECK_THROWS_AS(boundary_grid(-4.0), InvalidArgument);
    CHECK_THROWS_AS(boundary_grid(4.0, 0), InvalidArgument);
    CHECK_THROWS_AS(boundary_grid(4.0, 21), InvalidArgument);
}

TEST_CASE("montage places cells row-major with separators") {
    const Image one = montage({solid(4, 3, 1.0f)}, 1, 1);
    REQUIRE(one.width == 5);
    REQUIRE(one.height == 4);
    for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < 4; ++x) CHECK(one.at(x, y) == 1.0f);
    for (std::size_t y = 0; y < 4; ++y) CHECK(one.at(4, y) == kSeparatorValue);
    for (std::size_t x = 0; x < 5; ++x) CHECK(one.at(x, 3) == kSeparatorValue);

    const Image sheet = montage({solid(4, 3, 0.1f), solid(4, 3, 0.2f), solid(4, 3, 0.3f)}, 2, 2);
    REQUIRE(sheet.width == 10);
    REQUIRE(sheet.height == 8);
    CHECK(sheet.at(0, 0) == 0.1f);
    CHECK(sheet.at(5, 0) == 0.2f);
    CHECK(sheet.at(0, 4) == 0.3f);
    for (std::size_t y = 4; y < 7; ++y)
        for (std::size_t x = 5; x < 9; ++x) CHECK(sheet.at(x, y) == 0.0f);

    const std::vector<Image> many(256, solid(256, 64, 1.0f));
    const Image big = montage(many, 16, 16);
    CHECK(big.width == 16 * 257);
    CHECK(big.height == 16 * 65);
    CHECK(montage(many, 16, 16, 0).width == 16 * 256);

    CHECK_THROWS_AS(montage({}, 1, 1), InvalidArgument);
    CHECK_THROWS_AS(montage({solid(2, 2, 0), solid(2, 2, 0)}, 1, 1), InvalidArgument);
    CHECK_THROWS_AS(montage({solid(2, 2, 0)}, 0, 1), InvalidArgument);
    CHECK_THROWS_AS(montage({solid(2, 2, 0), solid(3, 2, 0)}, 1, 2), ShapeError);
}

TEST_CASE("histogram conserves counts") {
    const auto table = random_table(997, 8, 8, 3);
    for (std::size_t d = 0; d < 8; ++d) {
        const auto h = histogram_dim(table, d, 37);
        CHECK(h.dim == d);
        CHECK(h.counts.size() == 37);
        CHECK(h.edges.size() == 38);
        CHECK(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}) == 997);
        for (std::size_t i = 0; i + 1 < h.edges.size(); ++i) CHECK(h.edges[i] < h.edges[i + 1]);
    }
    const auto flat = histogram_values({2.0, 2.0, 2.0}, 4);
    CHECK(std::accumulate(flat.counts.begin(), flat.counts.end(), std::size_t{0}) == 3);
    CHECK(flat.edges.front() < 2.0);
    CHECK(flat.edges.back() > 2.0);

    CHECK_THROWS_AS(histogram_values({}, 4), InvalidArgument);
    CHECK_THROWS_AS(histogram_values({1.0}, 0), InvalidArgument);
    CHECK_THROWS_AS(histogram_dim(table, 8), InvalidArgument);
}

TEST_CASE("histogram of normal samples matches the bin probabilities") {
    testing::Rng rng(99);
    std::vector<double> v(100000);
    for (auto& x : v) x = rng.normal();
    const auto h = histogram_values(v, 50);
    const double n = static_cast<double>(v.size());
    for (std::size_t i = 0; i < 50; ++i) {
        const double p = normal_cdf(h.edges[i + 1]) - normal_cdf(h.edges[i]);
        const double expected = n * p;
        const double sigma = std::sqrt(n * p * (1.0 - p));
        CHECK(std::abs(static_cast<double>(h.counts[i]) - expected) <= 5.0 * sigma + 1.0);
        CHECK(std::abs(h.reference[i] - expected) <= 0.01 * n * (h.edges[1] - h.edges[0]));
    }
}

TEST_CASE("scatter rows follow the table") {
    const auto table = random_table(50, 8, 8, 5);
    const auto rows = scatter_dims(table, 1, 7);
    REQUIRE(rows.size() == 50);
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(rows[i].zi == table.rows[i].z[1]);
        CHECK(rows[i].zj == table.rows[i].z[7]);
        CHECK(rows[i].label == table.rows[i].label);
    }
    const auto swapped = scatter_dims(table, 7, 1);
    CHECK(swapped[3].zi == rows[3].zj);
    CHECK_THROWS_AS(scatter_dims(table, 1, 8), InvalidArgument);
    CHECK_THROWS_AS(scatter_dims(table, 2, 2), InvalidArgument);
}

TEST_CASE("embedding csv and centroid json round trip") {
    testing::TempDir dir("lab_io");
    const auto table = random_table(40, 8, 8, 6);
    write_embedding_csv(table, dir.path() / "emb.csv");
    CHECK(read_embedding_csv(dir.path() / "emb.csv") == table);
    CHECK(csv_data_rows(dir.path() / "emb.csv") == 41);

    const auto ct = centroid_table(centroids(table), "abc123");
    CHECK(ct.labels.count("Cable Fan_shaped") == 1);
    write_centroids_json(ct, dir.path() / "c.json");
    const auto back = read_centroids_json(dir.path() / "c.json");
    CHECK(back.checkpoint_id == "abc123");
    CHECK(back.labels == ct.labels);

    std::ofstream(dir.path() / "bad.csv") << "sample_id,label,z0\n0,1\n";
    CHECK_THROWS_AS(read_embedding_csv(dir.path() / "bad.csv"), IoError);
    CHECK_THROWS_AS(read_embedding_csv(dir.path() / "missing.csv"), IoError);
    std::ofstream(dir.path() / "bad.json") << "{\"labels\": 3}";
    CHECK_THROWS_AS(read_centroids_json(dir.path() / "bad.json"), IoError);
}

TEST_CASE("embedding is deterministic and independent of batch composition") {
    const auto model = random_desk_model(13);
    const auto images = random_images(5, 64, 256, 2);
    const std::vector<int> labels{0, 1, 2, 3, 4};
    const auto t1 = embed_dataset(model, images, labels, "id");
    const auto t2 = embed_dataset(model, images, labels, "id");
    CHECK(t1 == t2);
    REQUIRE(t1.rows.size() == 5);
    CHECK(t1.latent_dim == 8);

    const auto single = embed_dataset(model, images.slice_batch(3, 4), {3}, "id");
    CHECK(single.rows[0].z == t1.rows[3].z);

    const auto enc = model.encode(images);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t d = 0; d < 8; ++d) CHECK(std::abs(enc.mean[i * 8 + d] - t1.rows[i].z[d]) < 1e-4);

    CHECK_THROWS_AS(embed_dataset(model, random_images(1, 128, 512, 1), {0}), ShapeError);
    CHECK_THROWS_AS(embed_dataset(model, images, {0, 1}), ShapeError);
}

TEST_CASE("artifact export writes every histogram and the scatter") {
    testing::TempDir dir("lab_art");
    const auto table = random_table(120, 8, 8, 9);
    const auto files = export_embedding_artifacts(table, dir.path() / "out");
    CHECK(files.size() == 18);
    for (const auto& f : files) CHECK(std::filesystem::exists(f));
    for (std::size_t d = 0; d < 8; ++d) {
        std::ifstream in(dir.path() / "out" / ("hist_dim" + std::to_string(d) + ".csv"));
        std::string line;
        std::getline(in, line);
        CHECK(line == "bin_lo,bin_hi,count,reference");
        std::size_t total = 0;
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string cell;
            for (int k = 0; k < 3; ++k) std::getline(ss, cell, ',');
            total += std::stoul(cell);
        }
        CHECK(total == 120);
    }
    CHECK(csv_data_rows(dir.path() / "out" / "scatter_dim1_dim7.csv") == 120);
    const Image png = data::read_png(dir.path() / "out" / "hist_dim6.png");
    CHECK(png.width == 512);
}

TEST_CASE("pixel-space centroid classifier picks the nearest class mean") {
    core::Tensor<float> images({4, 2, 2, 1});
    const std::vector<float> px{0, 0, 0, 0, 0.1f, 0, 0, 0, 1, 1, 1, 1, 0.9f, 1, 1, 1};
    std::copy(px.begin(), px.end(), images.values().begin());
    const ImageCentroidClassifier clf(images, {5, 5, 2, 2});
    CHECK(clf.means().size() == 2);
    CHECK(clf.classify(solid(2, 2, 0.2f)) == 5);
    CHECK(clf.classify(solid(2, 2, 0.8f)) == 2);
}

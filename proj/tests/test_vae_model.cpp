#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <map>

#include "bridgevae/model/checkpoint.hpp"
#include "bridgevae/model/losses.hpp"
#include "bridgevae/model/trainer.hpp"
#include "bridgevae/model/vae.hpp"
#include "support.hpp"

using namespace bvae;
using namespace bvae::model;
using core::Mode;
using core::Shape;
using core::Tensor;

namespace {

struct Row {
    const char* name;
    Shape shape;
    std::size_t params;
};

const std::vector<Row> kEncoderTable{
    {"input_1", {128, 512, 1}, 0},
    {"conv2d", {64, 256, 64}, 640},
    {"batch_normalization", {64, 256, 64}, 256},
    {"activation", {64, 256, 64}, 0},
    {"dropout", {64, 256, 64}, 0},
    {"conv2d_1", {32, 128, 128}, 73856},
    {"batch_normalization_1", {32, 128, 128}, 512},
    {"activation_1", {32, 128, 128}, 0},
    {"dropout_1", {32, 128, 128}, 0},
    {"conv2d_2", {16, 64, 128}, 147584},
    {"batch_normalization_2", {16, 64, 128}, 512},
    {"activation_2", {16, 64, 128}, 0},
    {"dropout_2", {16, 64, 128}, 0},
    {"conv2d_3", {8, 32, 128}, 147584},
    {"batch_normalization_3", {8, 32, 128}, 512},
    {"activation_3", {8, 32, 128}, 0},
    {"dropout_3", {8, 32, 128}, 0},
    {"conv2d_4", {4, 16, 128}, 147584},
    {"batch_normalization_4", {4, 16, 128}, 512},
    {"activation_4", {4, 16, 128}, 0},
    {"dropout_4", {4, 16, 128}, 0},
    {"flatten", {8192}, 0},
    {"dense", {8}, 65544},
    {"dense_1", {8}, 65544},
};

const std::vector<Row> kDecoderTable{
    {"input_2", {8}, 0},
    {"dense_2", {8192}, 73728},
    {"reshape", {4, 16, 128}, 0},
    {"conv2d_transpose", {8, 32, 128}, 147584},
    {"batch_normalization_5", {8, 32, 128}, 512},
    {"activation_5", {8, 32, 128}, 0},
    {"dropout_5", {8, 32, 128}, 0},
    {"conv2d_transpose_1", {16, 64, 128}, 147584},
    {"batch_normalization_6", {16, 64, 128}, 512},
    {"activation_6", {16, 64, 128}, 0},
    {"dropout_6", {16, 64, 128}, 0},
    {"conv2d_transpose_2", {32, 128, 128}, 147584},
    {"batch_normalization_7", {32, 128, 128}, 512},
    {"activation_7", {32, 128, 128}, 0},
    {"dropout_7", {32, 128, 128}, 0},
    {"conv2d_transpose_3", {64, 256, 64}, 73792},
    {"batch_normalization_8", {64, 256, 64}, 256},
    {"activation_8", {64, 256, 64}, 0},
    {"dropout_8", {64, 256, 64}, 0},
    {"conv2d_transpose_4", {128, 512, 1}, 577},
};

void check_summary(const std::vector<LayerSummary>& got, const std::vector<Row>& want) {
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
        INFO(want[i].name);
        CHECK(got[i].name == want[i].name);
        CHECK(got[i].output_shape == want[i].shape);
        CHECK(got[i].params == want[i].params);
    }
}

// Parameter element counts grouped by layer name, taken from the live parameter tensors.
template <typename T>
std::map<std::string, std::size_t> live_counts(const core::ParamRefs<T>& params) {
    std::map<std::string, std::size_t> out;
    for (const auto* p : params) out[p->name.substr(0, p->name.find('/'))] += p->value.size();
    return out;
}

Tensor<float> scalar(double v) { return Tensor<float>({1, 1}, static_cast<float>(v)); }

}  // namespace

TEST_CASE("full profile encoder matches the reference summary") {
    Encoder<float> enc(ArchitectureProfile::full());
    check_summary(enc.summary(), kEncoderTable);

    const auto counts = count_params(enc.params());
    CHECK(counts.total == 650640);
    CHECK(counts.trainable == 649488);
    CHECK(counts.non_trainable == 1152);

    const auto live = live_counts(enc.params());
    for (const auto& row : enc.summary()) {
        if (row.params == 0) continue;
        CHECK(live.at(row.name) == row.params);
    }
}

TEST_CASE("full profile decoder matches the reference summary") {
    Decoder<float> dec(ArchitectureProfile::full());
    check_summary(dec.summary(), kDecoderTable);

    const auto counts = count_params(dec.params());
    CHECK(counts.total == 592641);
    CHECK(counts.trainable == 591745);
    CHECK(counts.non_trainable == 896);

    const auto live = live_counts(dec.params());
    for (const auto& row : dec.summary()) {
        if (row.params == 0) continue;
        CHECK(live.at(row.name) == row.params);
    }
}

TEST_CASE("full profile forward pass produces the summary shapes") {
    Vae<float> vae(ArchitectureProfile::full());
    vae.init(1);
    core::Rng rng(2);
    std::vector<Shape> enc_trace, dec_trace;
    const auto out = vae.encoder().forward(Tensor<float>({1, 128, 512, 1}, 0.5f), Mode::Train, rng, &enc_trace);
    CHECK(out.mean.shape() == Shape{1, 8});
    CHECK(out.log_var.shape() == Shape{1, 8});
    // Trace rows exclude the batch axis and the input layer.
    REQUIRE(enc_trace.size() == kEncoderTable.size() - 1);
    for (std::size_t i = 0; i < enc_trace.size(); ++i) CHECK(enc_trace[i] == kEncoderTable[i + 1].shape);
    const auto image = vae.decoder().forward(out.mean, Mode::Train, rng, &dec_trace);
    CHECK(image.shape() == Shape{1, 128, 512, 1});
    REQUIRE(dec_trace.size() == kDecoderTable.size() - 1);
    for (std::size_t i = 0; i < dec_trace.size(); ++i) CHECK(dec_trace[i] == kDecoderTable[i + 1].shape);
}

TEST_CASE("profiles validate and round-trip through json") {
    const auto desk = ArchitectureProfile::desk();
    CHECK(desk.height == 64);
    CHECK(desk.width == 256);
    CHECK(desk.flat_features() == 2 * 8 * 128);
    nlohmann::json j = desk;
    CHECK(j.get<ArchitectureProfile>() == desk);
    CHECK(ArchitectureProfile::by_name("full") == ArchitectureProfile::full());
    CHECK_THROWS_AS(ArchitectureProfile::by_name("huge"), InvalidArgument);
    auto bad = desk;
    bad.height = 60;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("encoder rejects images of the wrong size") {
    Vae<float> vae(ArchitectureProfile::desk());
    vae.init(0);
    vae.mark_statistics_ready();
    CHECK_THROWS_AS(vae.encode(Tensor<float>({1, 128, 512, 1})), ShapeError);
    CHECK_THROWS_AS(vae.decode(Tensor<float>({1, 7})), ShapeError);
}

TEST_CASE("reparameterization worked example") {
    const double mean = 1.72, log_var = -4.27, eps = 3.0;
    const double expected = mean + std::exp(0.5 * log_var) * eps;
    const auto z = reparameterize(scalar(mean), scalar(log_var), scalar(eps));
    CHECK(z[0] == doctest::Approx(expected).epsilon(1e-6));
    CHECK(std::abs(z[0] - 2.0746) < 1e-3);
    CHECK(std::abs(z[0] - 2.07) < 5e-3);
}

TEST_CASE("reconstruction loss worked example and clamp extreme") {
    const Tensor<double> y({1, 4}, std::vector<double>{0.0, 0.1, 0.9, 1.0});
    const Tensor<double> p({1, 4}, std::vector<double>{0.0, 0.9, 0.99, 0.1});
    // Per-pixel terms written out by hand, with the clamp applied to the first prediction.
    const double floor = 2e-7;
    const double terms = -std::log(1.0 - floor) + -(0.1 * std::log(0.9) + 0.9 * std::log(0.1)) +
                         -(0.9 * std::log(0.99) + 0.1 * std::log(0.01)) + -std::log(0.1);
    CHECK(reconstruction_loss(y, p) == doctest::Approx(terms / 4.0).epsilon(1e-12));
    CHECK(std::abs(reconstruction_loss(y, p) - 1.214) < 1e-3);

    const Tensor<double> one({1, 1}, 1.0), zero({1, 1}, 0.0);
    CHECK(std::abs(reconstruction_loss(one, zero) - 15.4249) < 1e-3);
    CHECK(reconstruction_loss(one, zero) == doctest::Approx(-std::log(2e-7)).epsilon(1e-12));
}

TEST_CASE("kl loss worked example") {
    const Tensor<double> mean({1, 2}, std::vector<double>{4.5, 3.3});
    const Tensor<double> log_var({1, 2}, std::vector<double>{-3.3, -3.7});
    const auto term = [](double mu, double lv) { return -0.5 * (1.0 + lv - mu * mu - std::exp(lv)); };
    const double t0 = term(4.5, -3.3), t1 = term(3.3, -3.7);
    CHECK(std::abs(t0 - 11.293) < 1e-3);
    CHECK(std::abs(t1 - 6.807) < 1e-3);
    const double kl = kl_loss(mean, log_var);
    CHECK(kl == doctest::Approx((t0 + t1) / 2.0).epsilon(1e-12));
    CHECK(std::abs(kl - 9.050) < 0.01);
    // One-decimal rounding of each term first gives (11.3 + 6.8) / 2 = 9.05, which prints as 9.1.
    CHECK(std::abs((std::round(t0 * 10) / 10 + std::round(t1 * 10) / 10) / 2.0 - 9.05) < 1e-9);
}

TEST_CASE("total loss combines the worked examples") {
    const auto t = total_loss(1.214, 9.050, kDefaultKlCoefficient);
    CHECK(t.total == doctest::Approx(1.22305).epsilon(1e-9));
    CHECK(t.coefficient == 0.001);
}

TEST_CASE("loss gradients match central differences") {
    testing::Rng rng(4);
    auto y = testing::random_tensor({2, 6}, rng, 0.0, 1.0);
    auto p = testing::random_tensor({2, 6}, rng, 0.05, 0.95);
    const auto g = reconstruction_loss_grad(y, p);
    CHECK(testing::relative_error(g, testing::numeric_grad(p, [&] { return reconstruction_loss(y, p); })) < 1e-6);

    auto mu = testing::random_tensor({2, 3}, rng, -2.0, 2.0);
    auto lv = testing::random_tensor({2, 3}, rng, -2.0, 1.0);
    const auto kg = kl_loss_grad(mu, lv, 0.7);
    CHECK(testing::relative_error(kg.mean, testing::numeric_grad(mu, [&] { return 0.7 * kl_loss(mu, lv); })) < 1e-6);
    CHECK(testing::relative_error(kg.log_var, testing::numeric_grad(lv, [&] { return 0.7 * kl_loss(mu, lv); })) <
          1e-6);

    Tensor<double> outside({1, 2}, std::vector<double>{0.0, 1.0});
    const auto zero_grad = reconstruction_loss_grad(Tensor<double>({1, 2}, 0.5), outside);
    CHECK(zero_grad[0] == 0.0);
    CHECK(zero_grad[1] == 0.0);
}

TEST_CASE("end-to-end gradients match central differences at desk scale") {
    auto profile = ArchitectureProfile::desk();
    profile.dropout_rate = 0.0;
    Vae<double> vae(profile);
    vae.init(21);
    testing::Rng rng(5);
    Tensor<double> images({2, 64, 256, 1});
    for (auto& v : images.values()) v = rng.uniform() < 0.1 ? 1.0 : 0.0;
    const auto noise = testing::random_tensor({2, 8}, rng);
    const double coef = 0.5;

    core::Rng pass_rng(0);
    vae.forward_backward(images, noise, Mode::Train, pass_rng, coef);

    auto params = vae.params();
    std::vector<core::Param<double>*> trainable;
    for (auto* p : params)
        if (p->trainable) trainable.push_back(p);

    Tensor<double> analytic({20}), numeric({20});
    // A small step keeps perturbations from crossing ReLU kinks among ~10^6 activations.
    const double h = 1e-7;
    for (std::size_t k = 0; k < 20; ++k) {
        auto* p = trainable[rng.below(trainable.size())];
        const std::size_t i = rng.below(p->value.size());
        analytic[k] = p->grad[i];
        const double keep = p->value[i];
        p->value[i] = keep + h;
        const double up = vae.loss(images, noise, Mode::Train, pass_rng, coef).total;
        p->value[i] = keep - h;
        const double down = vae.loss(images, noise, Mode::Train, pass_rng, coef).total;
        p->value[i] = keep;
        numeric[k] = (up - down) / (2.0 * h);
    }
    CHECK(testing::relative_error(analytic, numeric) < 1e-4);
}

TEST_CASE("checkpoint round trip restores identical parameters") {
    Vae<float> vae(ArchitectureProfile::desk());
    vae.init(3);
    vae.mark_statistics_ready();
    const auto ckpt = make_checkpoint(vae, {{"note", "unit"}});
    const std::string bytes = serialize_checkpoint(ckpt);
    CHECK(bytes.compare(0, 8, "BVAECKPT") == 0);
    const auto back = parse_checkpoint(bytes);
    CHECK(back.profile == ckpt.profile);
    CHECK(back.metadata == ckpt.metadata);
    CHECK(back.arrays == ckpt.arrays);
    CHECK(serialize_checkpoint(back) == bytes);
    CHECK(checkpoint_id(bytes).size() == 16);

    auto restored = restore_model(back);
    auto a = vae.params();
    auto b = restored.params();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);

    const Tensor<float> z({1, 8}, 0.3f);
    CHECK(vae.decode(z) == restored.decode(z));

    testing::TempDir dir("ckpt");
    save_checkpoint(ckpt, dir.path() / "m.ckpt");
    CHECK(load_checkpoint(dir.path() / "m.ckpt").arrays == ckpt.arrays);
    CHECK_THROWS_AS(load_checkpoint(dir.path() / "missing.ckpt"), IoError);
}

TEST_CASE("corrupt checkpoints are rejected with a specific kind") {
    Vae<float> vae(ArchitectureProfile::desk());
    vae.init(3);
    const std::string bytes = serialize_checkpoint(make_checkpoint(vae));
    const auto kind_of = [](const std::string& b) {
        try {
            parse_checkpoint(b);
        } catch (const CheckpointError& e) {
            return e.kind();
        }
        FAIL("parse succeeded");
        return CheckpointError::Kind::Malformed;
    };

    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK(kind_of(bad_magic) == CheckpointError::Kind::BadMagic);

    std::string bad_version = bytes;
    bad_version[8] = 9;
    CHECK(kind_of(bad_version) == CheckpointError::Kind::UnsupportedVersion);

    CHECK(kind_of(bytes.substr(0, bytes.size() - 5)) == CheckpointError::Kind::Truncated);
    CHECK(kind_of(bytes.substr(0, 10)) == CheckpointError::Kind::Truncated);

    auto ckpt = parse_checkpoint(bytes);
    ckpt.arrays.pop_back();
    CHECK_THROWS_AS(restore_model(ckpt), CheckpointError);
    try {
        restore_model(ckpt);
    } catch (const CheckpointError& e) {
        CHECK(e.kind() == CheckpointError::Kind::MissingArray);
    }

    auto reshaped = parse_checkpoint(bytes);
    reshaped.arrays.front().shape = {reshaped.arrays.front().data.size()};
    try {
        restore_model(reshaped);
        FAIL("restore succeeded");
    } catch (const CheckpointError& e) {
        CHECK(e.kind() == CheckpointError::Kind::ShapeMismatch);
    }
}

TEST_CASE("training is bit-reproducible and reduces the loss") {
    testing::Rng rng(12);
    Tensor<float> images({12, 64, 256, 1});
    for (std::size_t n = 0; n < 12; ++n) {
        const std::size_t row = 20 + rng.below(20);
        for (std::size_t y = row; y < row + 4; ++y)
            for (std::size_t x = 10; x < 246; ++x) images[(n * 64 + y) * 256 + x] = 1.0f;
    }
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.seed = 77;
    std::vector<std::size_t> seen;
    auto a = train(images, ArchitectureProfile::desk(), cfg, [&](const EpochLoss& e) { seen.push_back(e.epoch); });
    auto b = train(images, ArchitectureProfile::desk(), cfg);
    CHECK(seen == std::vector<std::size_t>{1, 2, 3});
    CHECK(a.history == b.history);
    CHECK(a.per_batch.size() == 9);
    CHECK(a.history.back().total < a.history.front().total);
    CHECK(serialize_checkpoint(checkpoint_from_training(a, cfg)) ==
          serialize_checkpoint(checkpoint_from_training(b, cfg)));

    testing::TempDir dir("hist");
    write_loss_history_csv(a.history, dir.path() / "h.csv");
    std::ifstream in(dir.path() / "h.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "epoch,reconstruction_loss,kl_loss,total_loss");

    CHECK_THROWS_AS(train(Tensor<float>({2, 32, 32, 1}), ArchitectureProfile::desk(), cfg), ShapeError);
}

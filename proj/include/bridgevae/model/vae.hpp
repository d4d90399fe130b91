#pragma once

// Convolutional VAE: five stride-2 conv stages down to a flat code with two
// linear heads (mean, log-variance), mirrored by a dense projection and five
// stride-2 transposed-conv stages back to a sigmoid image. Layer names follow
// the Keras auto-naming scheme so summaries line up with Keras model tables.

#include <map>
#include <string>
#include <vector>

#include "bridgevae/core/layers.hpp"
#include "bridgevae/model/losses.hpp"
#include "bridgevae/model/profile.hpp"

namespace bvae::model {

using core::Mode;
using core::Rng;
using core::Shape;
using core::Tensor;

/// One row of a model summary: output shape excludes the batch axis.
struct LayerSummary {
    std::string name;
    std::string type;
    Shape output_shape;
    std::size_t params = 0;

    bool operator==(const LayerSummary&) const = default;
};

struct ParamCounts {
    std::size_t total = 0;
    std::size_t trainable = 0;
    std::size_t non_trainable = 0;
};

inline std::string keras_name(const std::string& base, std::size_t index) {
    return index == 0 ? base : base + "_" + std::to_string(index);
}

template <typename T>
ParamCounts count_params(const core::ParamRefs<T>& params) {
    ParamCounts c;
    for (const auto* p : params) {
        c.total += p->value.size();
        (p->trainable ? c.trainable : c.non_trainable) += p->value.size();
    }
    return c;
}

template <typename T>
struct EncoderOutput {
    Tensor<T> mean;
    Tensor<T> log_var;
};

template <typename T>
class Encoder {
public:
    explicit Encoder(const ArchitectureProfile& profile) : profile_(profile) {
        profile_.validate();
        std::size_t in_ch = 1;
        for (std::size_t i = 0; i < profile_.channels.size(); ++i) {
            const std::size_t out_ch = profile_.channels[i];
            blocks_.push_back(Block{
                core::Conv2D<T>(keras_name("conv2d", i), profile_.kernel, in_ch, out_ch, profile_.stride),
                core::BatchNorm<T>(keras_name("batch_normalization", i), out_ch, profile_.batch_norm),
                core::ActivationLayer<T>(core::Activation::Relu), core::Dropout<T>(profile_.dropout_rate)});
            in_ch = out_ch;
        }
        mean_head_.emplace_back("dense", profile_.flat_features(), profile_.latent_dim);
        log_var_head_.emplace_back("dense_1", profile_.flat_features(), profile_.latent_dim);
    }

    void init(Rng& rng) {
        for (auto& b : blocks_) b.conv.init(rng);
        mean_head_[0].init(rng);
        log_var_head_[0].init(rng);
    }

    /// When `trace` is given, appends the output shape of every stage
    /// (conv/bn/act/dropout per block, then flatten and the two heads).
    EncoderOutput<T> forward(const Tensor<T>& x, Mode mode, Rng& rng, std::vector<Shape>* trace = nullptr) {
        check_input(x);
        Tensor<T> h = x;
        for (auto& b : blocks_) {
            h = b.conv.forward(h);
            record(trace, h);
            h = b.bn.forward(h, mode);
            record(trace, h);
            h = b.act.forward(h);
            record(trace, h);
            h = b.drop.forward(h, mode, rng);
            record(trace, h);
        }
        conv_shape_ = h.shape();
        const Tensor<T> flat = h.reshaped({h.dim(0), profile_.flat_features()});
        record(trace, flat);
        EncoderOutput<T> out{mean_head_[0].forward(flat), log_var_head_[0].forward(flat)};
        record(trace, out.mean);
        record(trace, out.log_var);
        return out;
    }

    Tensor<T> backward(const Tensor<T>& d_mean, const Tensor<T>& d_log_var) {
        Tensor<T> d_flat = mean_head_[0].backward(d_mean);
        core::accumulate(d_flat, log_var_head_[0].backward(d_log_var));
        Tensor<T> d = d_flat.reshaped(conv_shape_);
        for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
            d = it->drop.backward(d);
            d = it->act.backward(d);
            d = it->bn.backward(d);
            d = it->conv.backward(d);
        }
        return d;
    }

    /// Inference pass: moving statistics, no dropout, no caching.
    EncoderOutput<T> infer(const Tensor<T>& x) const {
        check_input(x);
        Tensor<T> h = x;
        for (const auto& b : blocks_) {
            h = core::activate(b.bn.infer(b.conv.infer(h)), core::Activation::Relu);
        }
        const Tensor<T> flat = h.reshaped({h.dim(0), profile_.flat_features()});
        return {mean_head_[0].infer(flat), log_var_head_[0].infer(flat)};
    }

    core::ParamRefs<T> params() {
        core::ParamRefs<T> out;
        for (auto& b : blocks_) {
            append(out, b.conv.params());
            append(out, b.bn.params());
        }
        append(out, mean_head_[0].params());
        append(out, log_var_head_[0].params());
        return out;
    }

    std::vector<LayerSummary> summary() const {
        std::vector<LayerSummary> rows;
        std::size_t h = profile_.height, w = profile_.width, in_ch = 1;
        rows.push_back({"input_1", "InputLayer", {h, w, 1}, 0});
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            const std::size_t c = profile_.channels[i];
            h /= profile_.stride;
            w /= profile_.stride;
            const std::size_t k2 = profile_.kernel * profile_.kernel;
            rows.push_back({keras_name("conv2d", i), "Conv2D", {h, w, c}, k2 * in_ch * c + c});
            rows.push_back({keras_name("batch_normalization", i), "BatchNormalization", {h, w, c}, 4 * c});
            rows.push_back({keras_name("activation", i), "Activation", {h, w, c}, 0});
            rows.push_back({keras_name("dropout", i), "Dropout", {h, w, c}, 0});
            in_ch = c;
        }
        const std::size_t flat = profile_.flat_features(), l = profile_.latent_dim;
        rows.push_back({"flatten", "Flatten", {flat}, 0});
        rows.push_back({"dense", "Dense", {l}, flat * l + l});
        rows.push_back({"dense_1", "Dense", {l}, flat * l + l});
        return rows;
    }

    std::vector<core::BatchNorm<T>*> batch_norms() {
        std::vector<core::BatchNorm<T>*> out;
        for (auto& b : blocks_) out.push_back(&b.bn);
        return out;
    }

    void clear_cache() {
        for (auto& b : blocks_) {
            b.conv.clear_cache();
            b.bn.clear_cache();
            b.act.clear_cache();
            b.drop.clear_cache();
        }
        mean_head_[0].clear_cache();
        log_var_head_[0].clear_cache();
    }

private:
    struct Block {
        core::Conv2D<T> conv;
        core::BatchNorm<T> bn;
        core::ActivationLayer<T> act;
        core::Dropout<T> drop;
    };

    void check_input(const Tensor<T>& x) const {
        const Shape want{x.rank() ? x.dim(0) : 0, profile_.height, profile_.width, 1};
        if (x.rank() != 4 || x.shape() != want) {
            throw ShapeError("encoder expects input N x " + std::to_string(profile_.height) + " x " +
                             std::to_string(profile_.width) + " x 1, got " + core::shape_str(x.shape()));
        }
    }

    static void record(std::vector<Shape>* trace, const Tensor<T>& t) {
        if (trace) trace->push_back(Shape(t.shape().begin() + 1, t.shape().end()));
    }
    static void append(core::ParamRefs<T>& out, const core::ParamRefs<T>& more) {
        out.insert(out.end(), more.begin(), more.end());
    }

    ArchitectureProfile profile_;
    std::vector<Block> blocks_;
    // Held in vectors so the class stays movable without default-constructible layers.
    std::vector<core::Dense<T>> mean_head_, log_var_head_;
    Shape conv_shape_;
};

template <typename T>
class Decoder {
public:
    explicit Decoder(const ArchitectureProfile& profile) : profile_(profile) {
        profile_.validate();
        project_.emplace_back("dense_2", profile_.latent_dim, profile_.flat_features());
        const auto& ch = profile_.channels;
        const std::size_t stages = ch.size();
        std::size_t in_ch = ch.back();
        for (std::size_t i = 0; i + 1 < stages; ++i) {
            const std::size_t out_ch = ch[stages - 2 - i];
            blocks_.push_back(Block{
                core::ConvTranspose2D<T>(keras_name("conv2d_transpose", i), profile_.kernel, in_ch, out_ch,
                                         profile_.stride),
                core::BatchNorm<T>(keras_name("batch_normalization", stages + i), out_ch, profile_.batch_norm),
                core::ActivationLayer<T>(core::Activation::Relu), core::Dropout<T>(profile_.dropout_rate)});
            in_ch = out_ch;
        }
        head_.emplace_back(keras_name("conv2d_transpose", stages - 1), profile_.kernel, in_ch, 1,
                           profile_.stride);
        sigmoid_.emplace_back(core::Activation::Sigmoid);
    }

    void init(Rng& rng) {
        project_[0].init(rng);
        for (auto& b : blocks_) b.conv.init(rng);
        head_[0].init(rng);
    }

    Tensor<T> forward(const Tensor<T>& z, Mode mode, Rng& rng, std::vector<Shape>* trace = nullptr) {
        check_input(z);
        Tensor<T> h = project_[0].forward(z);
        record(trace, h);
        h = h.reshaped(grid_shape(z.dim(0)));
        record(trace, h);
        for (auto& b : blocks_) {
            h = b.conv.forward(h);
            record(trace, h);
            h = b.bn.forward(h, mode);
            record(trace, h);
            h = b.act.forward(h);
            record(trace, h);
            h = b.drop.forward(h, mode, rng);
            record(trace, h);
        }
        h = sigmoid_[0].forward(head_[0].forward(h));
        record(trace, h);
        return h;
    }

    Tensor<T> backward(const Tensor<T>& d_image) {
        Tensor<T> d = head_[0].backward(sigmoid_[0].backward(d_image));
        for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
            d = it->drop.backward(d);
            d = it->act.backward(d);
            d = it->bn.backward(d);
            d = it->conv.backward(d);
        }
        return project_[0].backward(d.reshaped({d.dim(0), profile_.flat_features()}));
    }

    Tensor<T> infer(const Tensor<T>& z) const {
        check_input(z);
        Tensor<T> h = project_[0].infer(z).reshaped(grid_shape(z.dim(0)));
        for (const auto& b : blocks_) {
            h = core::activate(b.bn.infer(b.conv.infer(h)), core::Activation::Relu);
        }
        return core::activate(head_[0].infer(h), core::Activation::Sigmoid);
    }

    core::ParamRefs<T> params() {
        core::ParamRefs<T> out = project_[0].params();
        for (auto& b : blocks_) {
            for (auto* p : b.conv.params()) out.push_back(p);
            for (auto* p : b.bn.params()) out.push_back(p);
        }
        for (auto* p : head_[0].params()) out.push_back(p);
        return out;
    }

    std::vector<LayerSummary> summary() const {
        std::vector<LayerSummary> rows;
        const std::size_t l = profile_.latent_dim, flat = profile_.flat_features();
        const std::size_t stages = profile_.channels.size();
        const std::size_t k2 = profile_.kernel * profile_.kernel;
        rows.push_back({"input_2", "InputLayer", {l}, 0});
        rows.push_back({"dense_2", "Dense", {flat}, l * flat + flat});
        std::size_t h = profile_.bottleneck_height(), w = profile_.bottleneck_width();
        std::size_t in_ch = profile_.channels.back();
        rows.push_back({"reshape", "Reshape", {h, w, in_ch}, 0});
        for (std::size_t i = 0; i + 1 < stages; ++i) {
            const std::size_t c = profile_.channels[stages - 2 - i];
            h *= profile_.stride;
            w *= profile_.stride;
            rows.push_back({keras_name("conv2d_transpose", i), "Conv2DTranspose", {h, w, c}, k2 * in_ch * c + c});
            rows.push_back({keras_name("batch_normalization", stages + i), "BatchNormalization", {h, w, c}, 4 * c});
            rows.push_back({keras_name("activation", stages + i), "Activation", {h, w, c}, 0});
            rows.push_back({keras_name("dropout", stages + i), "Dropout", {h, w, c}, 0});
            in_ch = c;
        }
        h *= profile_.stride;
        w *= profile_.stride;
        rows.push_back({keras_name("conv2d_transpose", stages - 1), "Conv2DTranspose", {h, w, 1}, k2 * in_ch + 1});
        return rows;
    }

    std::vector<core::BatchNorm<T>*> batch_norms() {
        std::vector<core::BatchNorm<T>*> out;
        for (auto& b : blocks_) out.push_back(&b.bn);
        return out;
    }

    void clear_cache() {
        project_[0].clear_cache();
        for (auto& b : blocks_) {
            b.conv.clear_cache();
            b.bn.clear_cache();
            b.act.clear_cache();
            b.drop.clear_cache();
        }
        head_[0].clear_cache();
        sigmoid_[0].clear_cache();
    }

private:
    struct Block {
        core::ConvTranspose2D<T> conv;
        core::BatchNorm<T> bn;
        core::ActivationLayer<T> act;
        core::Dropout<T> drop;
    };

    Shape grid_shape(std::size_t n) const {
        return {n, profile_.bottleneck_height(), profile_.bottleneck_width(), profile_.channels.back()};
    }

    void check_input(const Tensor<T>& z) const {
        if (z.rank() != 2 || z.dim(1) != profile_.latent_dim) {
            throw ShapeError("decoder expects N x " + std::to_string(profile_.latent_dim) +
                             " latent input, got " + core::shape_str(z.shape()));
        }
    }

    static void record(std::vector<Shape>* trace, const Tensor<T>& t) {
        if (trace) trace->push_back(Shape(t.shape().begin() + 1, t.shape().end()));
    }

    ArchitectureProfile profile_;
    std::vector<core::Dense<T>> project_;
    std::vector<Block> blocks_;
    std::vector<core::ConvTranspose2D<T>> head_;
    std::vector<core::ActivationLayer<T>> sigmoid_;
};

/// Encoder + decoder pair with the training objective wired through both.
template <typename T>
class Vae {
public:
    explicit Vae(const ArchitectureProfile& profile)
        : profile_(profile), encoder_(profile), decoder_(profile) {}

    void init(std::uint64_t seed) {
        Rng rng(seed);
        encoder_.init(rng);
        decoder_.init(rng);
    }

    const ArchitectureProfile& profile() const { return profile_; }
    Encoder<T>& encoder() { return encoder_; }
    Decoder<T>& decoder() { return decoder_; }
    const Encoder<T>& encoder() const { return encoder_; }
    const Decoder<T>& decoder() const { return decoder_; }

    /// Encoder parameters followed by decoder parameters.
    core::ParamRefs<T> params() {
        auto out = encoder_.params();
        const auto dec = decoder_.params();
        out.insert(out.end(), dec.begin(), dec.end());
        return out;
    }

    void zero_grad() {
        for (auto* p : params()) p->zero_grad();
    }

    void mark_statistics_ready() {
        for (auto* bn : encoder_.batch_norms()) bn->mark_statistics_ready();
        for (auto* bn : decoder_.batch_norms()) bn->mark_statistics_ready();
    }

    /// One forward/backward pass. Gradients are zeroed first and left in the
    /// parameters. `noise` is the standard-normal draw for reparameterization.
    LossBreakdown forward_backward(const Tensor<T>& images, const Tensor<T>& noise, Mode mode, Rng& rng,
                                   double kl_coefficient) {
        zero_grad();
        auto enc = encoder_.forward(images, mode, rng);
        const Tensor<T> z = reparameterize(enc.mean, enc.log_var, noise);
        const Tensor<T> recon = decoder_.forward(z, mode, rng);

        const double rec = reconstruction_loss(images, recon);
        const double kl = kl_loss(enc.mean, enc.log_var);

        const Tensor<T> dz = decoder_.backward(reconstruction_loss_grad(images, recon));
        auto kl_grad = kl_loss_grad(enc.mean, enc.log_var, kl_coefficient);
        Tensor<T> d_mean = std::move(kl_grad.mean);
        Tensor<T> d_log_var = std::move(kl_grad.log_var);
        for (std::size_t i = 0; i < dz.size(); ++i) {
            d_mean[i] += dz[i];
            d_log_var[i] += dz[i] * T{0.5} * std::exp(T{0.5} * enc.log_var[i]) * noise[i];
        }
        encoder_.backward(d_mean, d_log_var);
        encoder_.clear_cache();
        decoder_.clear_cache();
        return total_loss(rec, kl, kl_coefficient);
    }

    /// Loss only, for finite-difference checks. Must be called in a mode
    /// that does not mutate state (Infer) to be repeatable.
    LossBreakdown loss(const Tensor<T>& images, const Tensor<T>& noise, Mode mode, Rng& rng,
                       double kl_coefficient) {
        auto enc = encoder_.forward(images, mode, rng);
        const Tensor<T> recon = decoder_.forward(reparameterize(enc.mean, enc.log_var, noise), mode, rng);
        encoder_.clear_cache();
        decoder_.clear_cache();
        return total_loss(reconstruction_loss(images, recon), kl_loss(enc.mean, enc.log_var), kl_coefficient);
    }

    EncoderOutput<T> encode(const Tensor<T>& images) const { return encoder_.infer(images); }
    Tensor<T> decode(const Tensor<T>& z) const { return decoder_.infer(z); }

private:
    ArchitectureProfile profile_;
    Encoder<T> encoder_;
    Decoder<T> decoder_;
};

/// Copies parameter values between models of the same profile, converting precision.
template <typename From, typename To>
void copy_parameters(Vae<From>& src, Vae<To>& dst) {
    auto a = src.params();
    auto b = dst.params();
    if (a.size() != b.size()) throw ShapeError("copy_parameters: parameter lists differ");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i]->value.shape() != b[i]->value.shape()) {
            throw ShapeError("copy_parameters: shape mismatch for " + a[i]->name);
        }
        b[i]->value = a[i]->value.template cast<To>();
    }
    dst.mark_statistics_ready();
}

}  // namespace bvae::model

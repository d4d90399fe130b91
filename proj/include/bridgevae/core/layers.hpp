#pragma once

// Stateful layer wrappers: each owns its parameters, remembers what its
// backward pass needs, and accumulates parameter gradients.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bridgevae/core/ops.hpp"
#include "bridgevae/core/rng.hpp"

namespace bvae::core {

enum class Mode { Train, Infer };

template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    bool trainable = true;

    Param(std::string n, Shape shape, bool train = true)
        : name(std::move(n)), value(shape), grad(shape), trainable(train) {}

    void zero_grad() { grad.fill(T{0}); }
};

template <typename T>
using ParamRefs = std::vector<Param<T>*>;

template <typename T>
void accumulate(Tensor<T>& into, const Tensor<T>& g) {
    for (std::size_t i = 0; i < into.size(); ++i) into[i] += g[i];
}

/// Glorot-uniform fill with limit sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_uniform(Tensor<T>& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-limit, limit));
}

inline void require_forward(bool cached, const std::string& layer) {
    if (!cached) throw StateError(layer + ": backward called before forward");
}

template <typename T>
class Conv2D {
public:
    Conv2D(std::string name, std::size_t kernel, std::size_t in_ch, std::size_t out_ch,
           std::size_t stride)
        : name_(std::move(name)),
          stride_(stride),
          kernel_(name_ + "/kernel", {kernel, kernel, in_ch, out_ch}),
          bias_(name_ + "/bias", {out_ch}) {}

    void init(Rng& rng) {
        const std::size_t k2 = kernel_.value.dim(0) * kernel_.value.dim(1);
        glorot_uniform(kernel_.value, k2 * kernel_.value.dim(2), k2 * kernel_.value.dim(3), rng);
        bias_.value.fill(T{0});
    }

    Tensor<T> forward(const Tensor<T>& x) {
        input_ = x;
        return conv2d(x, kernel_.value, &bias_.value, stride_);
    }

    Tensor<T> infer(const Tensor<T>& x) const { return conv2d(x, kernel_.value, &bias_.value, stride_); }

    Tensor<T> backward(const Tensor<T>& dy) {
        require_forward(input_.has_value(), name_);
        auto g = conv2d_vjp(*input_, kernel_.value, stride_, dy);
        accumulate(kernel_.grad, g.kernel);
        accumulate(bias_.grad, g.bias);
        return std::move(g.input);
    }

    ParamRefs<T> params() { return {&kernel_, &bias_}; }
    const std::string& name() const { return name_; }
    void clear_cache() { input_.reset(); }

private:
    std::string name_;
    std::size_t stride_;
    Param<T> kernel_, bias_;
    std::optional<Tensor<T>> input_;
};

template <typename T>
class ConvTranspose2D {
public:
    ConvTranspose2D(std::string name, std::size_t kernel, std::size_t in_ch, std::size_t out_ch,
                    std::size_t stride)
        : name_(std::move(name)),
          stride_(stride),
          kernel_(name_ + "/kernel", {kernel, kernel, out_ch, in_ch}),
          bias_(name_ + "/bias", {out_ch}) {}

    void init(Rng& rng) {
        const std::size_t k2 = kernel_.value.dim(0) * kernel_.value.dim(1);
        // Keras convention for transposed kernels: fan_in uses the last axis.
        glorot_uniform(kernel_.value, k2 * kernel_.value.dim(3), k2 * kernel_.value.dim(2), rng);
        bias_.value.fill(T{0});
    }

    Tensor<T> forward(const Tensor<T>& x) {
        input_ = x;
        return conv_transpose2d(x, kernel_.value, &bias_.value, stride_);
    }

    Tensor<T> infer(const Tensor<T>& x) const {
        return conv_transpose2d(x, kernel_.value, &bias_.value, stride_);
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        require_forward(input_.has_value(), name_);
        auto g = conv_transpose2d_vjp(*input_, kernel_.value, stride_, dy);
        accumulate(kernel_.grad, g.kernel);
        accumulate(bias_.grad, g.bias);
        return std::move(g.input);
    }

    ParamRefs<T> params() { return {&kernel_, &bias_}; }
    const std::string& name() const { return name_; }
    void clear_cache() { input_.reset(); }

private:
    std::string name_;
    std::size_t stride_;
    Param<T> kernel_, bias_;
    std::optional<Tensor<T>> input_;
};

template <typename T>
class Dense {
public:
    Dense(std::string name, std::size_t in, std::size_t out)
        : name_(std::move(name)), weight_(name_ + "/kernel", {in, out}), bias_(name_ + "/bias", {out}) {}

    void init(Rng& rng) {
        glorot_uniform(weight_.value, weight_.value.dim(0), weight_.value.dim(1), rng);
        bias_.value.fill(T{0});
    }

    Tensor<T> forward(const Tensor<T>& x) {
        input_ = x;
        return dense(x, weight_.value, &bias_.value);
    }

    Tensor<T> infer(const Tensor<T>& x) const { return dense(x, weight_.value, &bias_.value); }

    Tensor<T> backward(const Tensor<T>& dy) {
        require_forward(input_.has_value(), name_);
        auto g = dense_vjp(*input_, weight_.value, dy);
        accumulate(weight_.grad, g.weight);
        accumulate(bias_.grad, g.bias);
        return std::move(g.input);
    }

    ParamRefs<T> params() { return {&weight_, &bias_}; }
    const std::string& name() const { return name_; }
    void clear_cache() { input_.reset(); }

private:
    std::string name_;
    Param<T> weight_, bias_;
    std::optional<Tensor<T>> input_;
};

struct BatchNormConfig {
    double epsilon = 1e-3;
    double momentum = 0.99;
};

/// Per-channel normalization over every axis but the last.
template <typename T>
class BatchNorm {
public:
    BatchNorm(std::string name, std::size_t channels, BatchNormConfig cfg = {})
        : name_(std::move(name)),
          cfg_(cfg),
          gamma_(name_ + "/gamma", {channels}),
          beta_(name_ + "/beta", {channels}),
          moving_mean_(name_ + "/moving_mean", {channels}, false),
          moving_var_(name_ + "/moving_variance", {channels}, false) {
        gamma_.value.fill(T{1});
        moving_var_.value.fill(T{1});
    }

    std::size_t channels() const { return gamma_.value.size(); }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) {
        const std::size_t c = channels();
        if (x.shape().back() != c) {
            throw ShapeError(name_ + ": channel dimension is " + std::to_string(x.shape().back()) +
                             " but layer has " + std::to_string(c));
        }
        const std::size_t m = x.size() / c;
        std::vector<T> mean(c), inv_std(c);
        if (mode == Mode::Train) {
            std::vector<double> sum(c, 0.0), sq(c, 0.0);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < c; ++j) sum[j] += x[i * c + j];
            for (std::size_t j = 0; j < c; ++j) sum[j] /= static_cast<double>(m);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < c; ++j) {
                    const double d = x[i * c + j] - sum[j];
                    sq[j] += d * d;
                }
            for (std::size_t j = 0; j < c; ++j) {
                const double var = sq[j] / static_cast<double>(m);
                mean[j] = static_cast<T>(sum[j]);
                inv_std[j] = static_cast<T>(1.0 / std::sqrt(var + cfg_.epsilon));
                auto& mm = moving_mean_.value[j];
                auto& mv = moving_var_.value[j];
                mm = static_cast<T>(mm * cfg_.momentum + sum[j] * (1.0 - cfg_.momentum));
                mv = static_cast<T>(mv * cfg_.momentum + var * (1.0 - cfg_.momentum));
            }
            has_statistics_ = true;
        } else {
            if (!has_statistics_) {
                throw StateError(name_ + ": inference requested before moving statistics exist");
            }
            for (std::size_t j = 0; j < c; ++j) {
                mean[j] = moving_mean_.value[j];
                inv_std[j] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(moving_var_.value[j]) +
                                                            cfg_.epsilon));
            }
        }
        Tensor<T> xhat(x.shape()), y(x.shape());
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                const std::size_t k = i * c + j;
                xhat[k] = (x[k] - mean[j]) * inv_std[j];
                y[k] = gamma_.value[j] * xhat[k] + beta_.value[j];
            }
        cache_ = Cache{std::move(xhat), std::move(inv_std), mode};
        return y;
    }

    /// Inference with moving statistics; records nothing.
    Tensor<T> infer(const Tensor<T>& x) const {
        if (!has_statistics_) {
            throw StateError(name_ + ": inference requested before moving statistics exist");
        }
        const std::size_t c = channels();
        if (x.shape().back() != c) throw ShapeError(name_ + ": channel dimension mismatch");
        std::vector<T> scale(c), shift(c);
        for (std::size_t j = 0; j < c; ++j) {
            const double inv = 1.0 / std::sqrt(static_cast<double>(moving_var_.value[j]) + cfg_.epsilon);
            scale[j] = static_cast<T>(gamma_.value[j] * inv);
            shift[j] = static_cast<T>(beta_.value[j] - moving_mean_.value[j] * gamma_.value[j] * inv);
        }
        Tensor<T> y(x.shape());
        const std::size_t m = x.size() / c;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < c; ++j) y[i * c + j] = x[i * c + j] * scale[j] + shift[j];
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        require_forward(cache_.has_value(), name_);
        const auto& xhat = cache_->xhat;
        const std::size_t c = channels(), m = dy.size() / c;
        std::vector<double> sum_dy(c, 0.0), sum_dy_xhat(c, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                sum_dy[j] += dy[i * c + j];
                sum_dy_xhat[j] += dy[i * c + j] * xhat[i * c + j];
            }
        for (std::size_t j = 0; j < c; ++j) {
            gamma_.grad[j] += static_cast<T>(sum_dy_xhat[j]);
            beta_.grad[j] += static_cast<T>(sum_dy[j]);
        }
        Tensor<T> dx(dy.shape());
        const double inv_m = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                const std::size_t k = i * c + j;
                const double scale = static_cast<double>(gamma_.value[j]) * cache_->inv_std[j];
                if (cache_->mode == Mode::Train) {
                    dx[k] = static_cast<T>(scale * (dy[k] - inv_m * sum_dy[j] -
                                                    inv_m * xhat[k] * sum_dy_xhat[j]));
                } else {
                    dx[k] = static_cast<T>(scale * dy[k]);
                }
            }
        return dx;
    }

    /// Installs moving statistics directly (checkpoint load, tests).
    void set_statistics(const Tensor<T>& mean, const Tensor<T>& var) {
        if (mean.size() != channels() || var.size() != channels()) {
            throw ShapeError(name_ + ": statistics length must equal channel count");
        }
        moving_mean_.value = mean;
        moving_var_.value = var;
        has_statistics_ = true;
    }
    void mark_statistics_ready() { has_statistics_ = true; }
    bool has_statistics() const { return has_statistics_; }

    ParamRefs<T> params() { return {&gamma_, &beta_, &moving_mean_, &moving_var_}; }
    const std::string& name() const { return name_; }
    void clear_cache() { cache_.reset(); }

private:
    struct Cache {
        Tensor<T> xhat;
        std::vector<T> inv_std;
        Mode mode;
    };
    std::string name_;
    BatchNormConfig cfg_;
    Param<T> gamma_, beta_, moving_mean_, moving_var_;
    bool has_statistics_ = false;
    std::optional<Cache> cache_;
};

/// Inverted dropout: survivors are scaled by 1/(1-rate) in training so
/// inference is the identity.
template <typename T>
class Dropout {
public:
    explicit Dropout(double rate) : rate_(rate) {
        if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("dropout rate must lie in [0, 1)");
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) {
        if (mode == Mode::Infer || rate_ == 0.0) {
            mask_ = std::nullopt;
            cached_ = true;
            return x;
        }
        const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
        Tensor<T> mask(x.shape());
        Tensor<T> y(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) {
            mask[i] = rng.uniform() < rate_ ? T{0} : keep_scale;
            y[i] = x[i] * mask[i];
        }
        mask_ = std::move(mask);
        cached_ = true;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        require_forward(cached_, "dropout");
        if (!mask_) return dy;
        Tensor<T> dx(dy.shape());
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * (*mask_)[i];
        return dx;
    }

    double rate() const { return rate_; }
    void clear_cache() {
        mask_.reset();
        cached_ = false;
    }

private:
    double rate_;
    std::optional<Tensor<T>> mask_;
    bool cached_ = false;
};

template <typename T>
class ActivationLayer {
public:
    explicit ActivationLayer(Activation kind) : kind_(kind) {}

    Tensor<T> forward(const Tensor<T>& x) {
        output_ = activate(x, kind_);
        return *output_;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        require_forward(output_.has_value(), "activation");
        return activate_vjp(*output_, kind_, dy);
    }

    void clear_cache() { output_.reset(); }

private:
    Activation kind_;
    std::optional<Tensor<T>> output_;
};

}  // namespace bvae::core

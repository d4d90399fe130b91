#pragma once

// VAE objective. Reductions follow the per-pixel and per-dimension means,
// then a mean over the batch.

#include <algorithm>
#include <cmath>

#include "bridgevae/core/tensor.hpp"

namespace bvae::model {

/// Predictions are clamped to [kProbabilityFloor, 1 - kProbabilityFloor]
/// before taking logarithms.
inline constexpr double kProbabilityFloor = 2e-7;

/// Default relative weight of the KL term.
inline constexpr double kDefaultKlCoefficient = 0.001;

struct LossBreakdown {
    double reconstruction = 0.0;
    double kl = 0.0;
    double total = 0.0;
    double coefficient = kDefaultKlCoefficient;
};

inline LossBreakdown total_loss(double reconstruction, double kl, double coefficient) {
    return {reconstruction, kl, reconstruction + coefficient * kl, coefficient};
}

namespace detail {
inline void require_same(const core::Shape& a, const core::Shape& b, const char* op) {
    if (a != b) {
        throw ShapeError(std::string(op) + ": shape " + core::shape_str(a) + " does not match " +
                         core::shape_str(b));
    }
}
}  // namespace detail

/// Binary cross-entropy, mean over pixels then over the leading (batch) axis.
/// Both means have the same denominators, so this equals the flat mean.
template <typename T>
double reconstruction_loss(const core::Tensor<T>& target, const core::Tensor<T>& predicted) {
    detail::require_same(target.shape(), predicted.shape(), "reconstruction_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double y = target[i];
        const double p = std::clamp<double>(predicted[i], kProbabilityFloor, 1.0 - kProbabilityFloor);
        acc -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    return acc / static_cast<double>(target.size());
}

/// d loss / d predicted. Zero where the clamp is active.
template <typename T>
core::Tensor<T> reconstruction_loss_grad(const core::Tensor<T>& target,
                                         const core::Tensor<T>& predicted) {
    detail::require_same(target.shape(), predicted.shape(), "reconstruction_loss_grad");
    core::Tensor<T> g(predicted.shape());
    const double inv_n = 1.0 / static_cast<double>(target.size());
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double y = target[i];
        const double p = predicted[i];
        if (p < kProbabilityFloor || p > 1.0 - kProbabilityFloor) continue;
        g[i] = static_cast<T>(inv_n * (-y / p + (1.0 - y) / (1.0 - p)));
    }
    return g;
}

/// KL(N(mean, exp(log_var)) || N(0, 1)), mean over latent dims then batch.
template <typename T>
double kl_loss(const core::Tensor<T>& mean, const core::Tensor<T>& log_var) {
    detail::require_same(mean.shape(), log_var.shape(), "kl_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        const double mu = mean[i], lv = log_var[i];
        acc += -0.5 * (1.0 + lv - mu * mu - std::exp(lv));
    }
    return acc / static_cast<double>(mean.size());
}

template <typename T>
struct KlGrads {
    core::Tensor<T> mean;
    core::Tensor<T> log_var;
};

template <typename T>
KlGrads<T> kl_loss_grad(const core::Tensor<T>& mean, const core::Tensor<T>& log_var, double scale) {
    detail::require_same(mean.shape(), log_var.shape(), "kl_loss_grad");
    KlGrads<T> g{core::Tensor<T>(mean.shape()), core::Tensor<T>(mean.shape())};
    const double k = scale / static_cast<double>(mean.size());
    for (std::size_t i = 0; i < mean.size(); ++i) {
        g.mean[i] = static_cast<T>(k * mean[i]);
        g.log_var[i] = static_cast<T>(k * -0.5 * (1.0 - std::exp(static_cast<double>(log_var[i]))));
    }
    return g;
}

/// z = mean + exp(log_var / 2) * noise, elementwise.
template <typename T>
core::Tensor<T> reparameterize(const core::Tensor<T>& mean, const core::Tensor<T>& log_var,
                               const core::Tensor<T>& noise) {
    detail::require_same(mean.shape(), log_var.shape(), "reparameterize");
    detail::require_same(mean.shape(), noise.shape(), "reparameterize");
    core::Tensor<T> z(mean.shape());
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = mean[i] + std::exp(T{0.5} * log_var[i]) * noise[i];
    }
    return z;
}

}  // namespace bvae::model

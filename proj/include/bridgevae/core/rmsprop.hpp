#pragma once

#include <cmath>
#include <vector>

#include "bridgevae/core/layers.hpp"

namespace bvae::core {

struct RmsPropConfig {
    double learning_rate = 0.001;
    double rho = 0.9;
    double epsilon = 1e-7;
};

/// a <- rho*a + (1-rho)*g^2 ; p <- p - lr*g / (sqrt(a) + eps).
/// Non-trainable parameters are skipped and keep no accumulator.
template <typename T>
class RmsProp {
public:
    explicit RmsProp(RmsPropConfig cfg = {}) : cfg_(cfg) {}

    void step(const ParamRefs<T>& params) {
        if (accumulators_.empty()) {
            accumulators_.reserve(params.size());
            for (const auto* p : params) accumulators_.emplace_back(p->value.shape());
        }
        if (accumulators_.size() != params.size()) {
            throw ShapeError("rmsprop: parameter count changed from " +
                             std::to_string(accumulators_.size()) + " to " + std::to_string(params.size()));
        }
        const T rho = static_cast<T>(cfg_.rho);
        const T lr = static_cast<T>(cfg_.learning_rate);
        const T eps = static_cast<T>(cfg_.epsilon);
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = *params[i];
            auto& acc = accumulators_[i];
            if (acc.shape() != p.value.shape() || p.grad.shape() != p.value.shape()) {
                throw ShapeError("rmsprop: shape mismatch for " + p.name + ": value " +
                                 shape_str(p.value.shape()) + ", grad " + shape_str(p.grad.shape()) +
                                 ", accumulator " + shape_str(acc.shape()));
            }
            if (!p.trainable) continue;
            for (std::size_t k = 0; k < p.value.size(); ++k) {
                const T g = p.grad[k];
                acc[k] = rho * acc[k] + (T{1} - rho) * g * g;
                p.value[k] -= lr * g / (std::sqrt(acc[k]) + eps);
            }
        }
        ++iterations_;
    }

    const std::vector<Tensor<T>>& accumulators() const { return accumulators_; }
    std::size_t iterations() const { return iterations_; }
    const RmsPropConfig& config() const { return cfg_; }

private:
    RmsPropConfig cfg_;
    std::vector<Tensor<T>> accumulators_;
    std::size_t iterations_ = 0;
};

}  // namespace bvae::core

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>

#include "bridgevae/core/layers.hpp"
#include "bridgevae/core/rng.hpp"
#include "bridgevae/core/tensor.hpp"

namespace testing {

using bvae::core::Rng;
using bvae::core::Shape;
using bvae::core::Tensor;

inline Tensor<double> random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(shape);
    for (auto& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

/// Central differences of a scalar function over every element of `x`.
inline Tensor<double> numeric_grad(Tensor<double>& x, const std::function<double()>& f, double h = 1e-5) {
    Tensor<double> g(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f();
        x[i] = keep - h;
        const double down = f();
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// ||a - b|| / max(||a||, ||b||), with a floor so all-zero pairs compare equal.
inline double relative_error(const Tensor<double>& a, const Tensor<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        Rng rng(static_cast<std::uint64_t>(std::hash<std::string>{}(tag)) ^
                static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()));
        path_ = std::filesystem::temp_directory_path() / ("bridgevae_" + tag + "_" + std::to_string(rng.next_u64()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testing

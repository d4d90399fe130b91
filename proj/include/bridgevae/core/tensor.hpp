#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "bridgevae/error.hpp"

namespace bvae::core {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ')';
    return os.str();
}

// Dense row-major array. 4-D activations use N x H x W x C.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T{0})
        : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
        check_dims();
    }

    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_dims();
        if (data_.size() != shape_size(shape_)) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
        }
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    T& at4(std::size_t n, std::size_t h, std::size_t w, std::size_t c) noexcept {
        return data_[((n * shape_[1] + h) * shape_[2] + w) * shape_[3] + c];
    }
    const T& at4(std::size_t n, std::size_t h, std::size_t w, std::size_t c) const noexcept {
        return data_[((n * shape_[1] + h) * shape_[2] + w) * shape_[3] + c];
    }

    Tensor reshaped(Shape shape) const {
        if (shape_size(shape) != data_.size()) {
            throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
        }
        return Tensor(std::move(shape), data_);
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    // Rows [begin, end) along the leading dimension.
    Tensor slice_batch(std::size_t begin, std::size_t end) const {
        if (rank() == 0 || begin > end || end > shape_[0]) {
            throw ShapeError("batch slice out of range for " + shape_str(shape_));
        }
        const std::size_t stride = data_.size() / std::max<std::size_t>(shape_[0], 1);
        Shape s = shape_;
        s[0] = end - begin;
        return Tensor(std::move(s), std::vector<T>(data_.begin() + begin * stride,
                                                   data_.begin() + end * stride));
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.size());
        std::transform(data_.begin(), data_.end(), out.begin(),
                       [](T v) { return static_cast<U>(v); });
        return Tensor<U>(shape_, std::move(out));
    }

    bool operator==(const Tensor& other) const = default;

private:
    void check_dims() const {
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (shape_[i] == 0) {
                throw ShapeError("tensor dimension " + std::to_string(i) + " is zero in " +
                                 shape_str(shape_));
            }
        }
    }

    Shape shape_;
    std::vector<T> data_;
};

template <typename T>
T dot(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.size() != b.size()) throw ShapeError("dot: size mismatch");
    T acc{0};
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

// Gathers rows of the leading dimension in the given order.
template <typename T>
Tensor<T> gather_batch(const Tensor<T>& src, std::span<const std::size_t> rows) {
    const std::size_t stride = src.size() / src.dim(0);
    Shape s = src.shape();
    s[0] = rows.size();
    std::vector<T> out(rows.size() * stride);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= src.dim(0)) throw ShapeError("gather_batch: row out of range");
        std::copy_n(src.data() + rows[i] * stride, stride, out.data() + i * stride);
    }
    return Tensor<T>(std::move(s), std::move(out));
}

}  // namespace bvae::core

#pragma once

// Stateless forward and vector-Jacobian kernels for the layer set the VAE
// uses. Every convolution is square-kernel with TensorFlow "same" padding.
// Conv kernels are laid out (k, k, in_channels, out_channels); a transposed
// convolution takes the kernel of the convolution it is the adjoint of, so
// its layout is (k, k, out_channels, in_channels).

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>

#include <Eigen/Core>

#include "bridgevae/core/tensor.hpp"

namespace bvae::core {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

/// Spatial bookkeeping for a same-padded convolution from a (in_h, in_w)
/// image to a (out_h, out_w) grid.
struct ConvGeometry {
    std::size_t in_h = 0, in_w = 0, out_h = 0, out_w = 0;
    std::size_t kernel = 0, stride = 1;
    std::size_t pad_top = 0, pad_left = 0;

    static ConvGeometry same(std::size_t in_h, std::size_t in_w, std::size_t kernel,
                             std::size_t stride) {
        if (stride == 0) throw InvalidArgument("stride must be >= 1");
        if (kernel == 0) throw InvalidArgument("kernel size must be >= 1");
        ConvGeometry g;
        g.in_h = in_h;
        g.in_w = in_w;
        g.kernel = kernel;
        g.stride = stride;
        g.out_h = (in_h + stride - 1) / stride;
        g.out_w = (in_w + stride - 1) / stride;
        const auto pad_total = [&](std::size_t in, std::size_t out) -> std::size_t {
            const std::size_t need = (out - 1) * stride + kernel;
            return need > in ? need - in : 0;
        };
        g.pad_top = pad_total(in_h, g.out_h) / 2;
        g.pad_left = pad_total(in_w, g.out_w) / 2;
        return g;
    }

    std::size_t patches() const { return out_h * out_w; }
};

/// Unfolds one H x W x C image into a (out_h*out_w) x (k*k*C) patch matrix.
template <typename T>
void im2col(const T* image, std::size_t channels, const ConvGeometry& g, T* cols) {
    const std::size_t k = g.kernel;
    const std::size_t row_len = k * k * channels;
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            T* row = cols + (oy * g.out_w + ox) * row_len;
            for (std::size_t ky = 0; ky < k; ++ky) {
                const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                static_cast<std::ptrdiff_t>(g.pad_top);
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                    static_cast<std::ptrdiff_t>(g.pad_left);
                    T* dst = row + (ky * k + kx) * channels;
                    if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h) ||
                        ix >= static_cast<std::ptrdiff_t>(g.in_w)) {
                        std::fill_n(dst, channels, T{0});
                    } else {
                        const T* src =
                            image + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) *
                                        channels;
                        std::copy_n(src, channels, dst);
                    }
                }
            }
        }
    }
}

/// Adjoint of im2col: scatters-adds a patch matrix back onto an image.
template <typename T>
void col2im_add(const T* cols, std::size_t channels, const ConvGeometry& g, T* image) {
    const std::size_t k = g.kernel;
    const std::size_t row_len = k * k * channels;
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const T* row = cols + (oy * g.out_w + ox) * row_len;
            for (std::size_t ky = 0; ky < k; ++ky) {
                const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                static_cast<std::ptrdiff_t>(g.pad_top);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                for (std::size_t kx = 0; kx < k; ++kx) {
                    const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                    static_cast<std::ptrdiff_t>(g.pad_left);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                    const T* src = row + (ky * k + kx) * channels;
                    T* dst = image + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) *
                                         channels;
                    for (std::size_t c = 0; c < channels; ++c) dst[c] += src[c];
                }
            }
        }
    }
}

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

template <typename T>
void check_conv_kernel(const Tensor<T>& kernel, const char* op) {
    require(kernel.rank() == 4 && kernel.dim(0) == kernel.dim(1),
            std::string(op) + ": kernel must be k x k x Cin x Cout, got " + shape_str(kernel.shape()));
}

template <typename T>
void check_nhwc(const Tensor<T>& x, const char* op) {
    require(x.rank() == 4, std::string(op) + ": input must be N x H x W x C, got " + shape_str(x.shape()));
}

}  // namespace detail

template <typename T>
struct ConvGrads {
    Tensor<T> input;
    Tensor<T> kernel;
    Tensor<T> bias;
};

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>* bias,
                 std::size_t stride) {
    detail::check_nhwc(x, "conv2d");
    detail::check_conv_kernel(kernel, "conv2d");
    const std::size_t cin = kernel.dim(2), cout = kernel.dim(3);
    detail::require(x.dim(3) == cin, "conv2d: input channel dimension (axis 3) is " +
                                         std::to_string(x.dim(3)) + " but kernel expects " +
                                         std::to_string(cin));
    if (bias) detail::require(bias->size() == cout, "conv2d: bias length must equal Cout");
    const auto g = ConvGeometry::same(x.dim(1), x.dim(2), kernel.dim(0), stride);
    const std::size_t n = x.dim(0);
    const std::size_t rows = g.patches(), depth = g.kernel * g.kernel * cin;
    Tensor<T> y({n, g.out_h, g.out_w, cout});
    std::vector<T> cols(rows * depth);
    ConstMatMap<T> kmat(kernel.data(), depth, cout);
    for (std::size_t s = 0; s < n; ++s) {
        im2col(x.data() + s * g.in_h * g.in_w * cin, cin, g, cols.data());
        MatMap<T> out(y.data() + s * rows * cout, rows, cout);
        out.noalias() = ConstMatMap<T>(cols.data(), rows, depth) * kmat;
        if (bias) {
            out.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias->data(), cout);
        }
    }
    return y;
}

/// Vector-Jacobian product of conv2d given the forward input and upstream gradient.
template <typename T>
ConvGrads<T> conv2d_vjp(const Tensor<T>& x, const Tensor<T>& kernel, std::size_t stride,
                        const Tensor<T>& dy) {
    const std::size_t cin = kernel.dim(2), cout = kernel.dim(3);
    const auto g = ConvGeometry::same(x.dim(1), x.dim(2), kernel.dim(0), stride);
    const std::size_t n = x.dim(0);
    detail::require(dy.shape() == Shape({n, g.out_h, g.out_w, cout}),
                    "conv2d_vjp: upstream gradient shape " + shape_str(dy.shape()));
    const std::size_t rows = g.patches(), depth = g.kernel * g.kernel * cin;
    ConvGrads<T> grads{Tensor<T>(x.shape()), Tensor<T>(kernel.shape()), Tensor<T>({cout})};
    std::vector<T> cols(rows * depth);
    ConstMatMap<T> kmat(kernel.data(), depth, cout);
    MatMap<T> dk(grads.kernel.data(), depth, cout);
    for (std::size_t s = 0; s < n; ++s) {
        im2col(x.data() + s * g.in_h * g.in_w * cin, cin, g, cols.data());
        ConstMatMap<T> dys(dy.data() + s * rows * cout, rows, cout);
        dk.noalias() += ConstMatMap<T>(cols.data(), rows, depth).transpose() * dys;
        MatMap<T>(cols.data(), rows, depth).noalias() = dys * kmat.transpose();
        col2im_add(cols.data(), cin, g, grads.input.data() + s * g.in_h * g.in_w * cin);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cout; ++c) grads.bias[c] += dys(r, c);
    }
    return grads;
}

/// Transposed convolution: output spatial size is input size times stride.
/// The kernel is (k, k, out_channels, in_channels).
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>* bias,
                           std::size_t stride) {
    detail::check_nhwc(x, "conv_transpose2d");
    detail::check_conv_kernel(kernel, "conv_transpose2d");
    const std::size_t cout = kernel.dim(2), cin = kernel.dim(3);
    detail::require(x.dim(3) == cin, "conv_transpose2d: input channel dimension (axis 3) is " +
                                         std::to_string(x.dim(3)) + " but kernel expects " +
                                         std::to_string(cin));
    if (bias) detail::require(bias->size() == cout, "conv_transpose2d: bias length must equal Cout");
    if (stride == 0) throw InvalidArgument("stride must be >= 1");
    const std::size_t n = x.dim(0), oh = x.dim(1) * stride, ow = x.dim(2) * stride;
    const auto g = ConvGeometry::same(oh, ow, kernel.dim(0), stride);
    const std::size_t rows = g.patches(), depth = g.kernel * g.kernel * cout;
    Tensor<T> y({n, oh, ow, cout});
    std::vector<T> cols(rows * depth);
    ConstMatMap<T> kmat(kernel.data(), depth, cin);
    for (std::size_t s = 0; s < n; ++s) {
        MatMap<T>(cols.data(), rows, depth).noalias() =
            ConstMatMap<T>(x.data() + s * rows * cin, rows, cin) * kmat.transpose();
        T* out = y.data() + s * oh * ow * cout;
        col2im_add(cols.data(), cout, g, out);
        if (bias) {
            MatMap<T>(out, oh * ow, cout).rowwise() +=
                Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias->data(), cout);
        }
    }
    return y;
}

template <typename T>
ConvGrads<T> conv_transpose2d_vjp(const Tensor<T>& x, const Tensor<T>& kernel, std::size_t stride,
                                  const Tensor<T>& dy) {
    const std::size_t cout = kernel.dim(2), cin = kernel.dim(3);
    const std::size_t n = x.dim(0), oh = x.dim(1) * stride, ow = x.dim(2) * stride;
    detail::require(dy.shape() == Shape({n, oh, ow, cout}),
                    "conv_transpose2d_vjp: upstream gradient shape " + shape_str(dy.shape()));
    const auto g = ConvGeometry::same(oh, ow, kernel.dim(0), stride);
    const std::size_t rows = g.patches(), depth = g.kernel * g.kernel * cout;
    ConvGrads<T> grads{Tensor<T>(x.shape()), Tensor<T>(kernel.shape()), Tensor<T>({cout})};
    std::vector<T> cols(rows * depth);
    ConstMatMap<T> kmat(kernel.data(), depth, cin);
    MatMap<T> dk(grads.kernel.data(), depth, cin);
    for (std::size_t s = 0; s < n; ++s) {
        const T* dys = dy.data() + s * oh * ow * cout;
        im2col(dys, cout, g, cols.data());
        ConstMatMap<T> colmat(cols.data(), rows, depth);
        MatMap<T>(grads.input.data() + s * rows * cin, rows, cin).noalias() = colmat * kmat;
        dk.noalias() += colmat.transpose() * ConstMatMap<T>(x.data() + s * rows * cin, rows, cin);
        for (std::size_t p = 0; p < oh * ow; ++p)
            for (std::size_t c = 0; c < cout; ++c) grads.bias[c] += dys[p * cout + c];
    }
    return grads;
}

template <typename T>
struct DenseGrads {
    Tensor<T> input;
    Tensor<T> weight;
    Tensor<T> bias;
};

/// Affine map: x (N x Din) times weight (Din x Dout) plus bias.
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias) {
    detail::require(x.rank() == 2, "dense: input must be N x Din, got " + shape_str(x.shape()));
    detail::require(weight.rank() == 2, "dense: weight must be Din x Dout");
    detail::require(x.dim(1) == weight.dim(0), "dense: input dimension (axis 1) is " +
                                                   std::to_string(x.dim(1)) + " but weight expects " +
                                                   std::to_string(weight.dim(0)));
    const std::size_t n = x.dim(0), din = weight.dim(0), dout = weight.dim(1);
    if (bias) detail::require(bias->size() == dout, "dense: bias length must equal Dout");
    Tensor<T> y({n, dout});
    MatMap<T> out(y.data(), n, dout);
    out.noalias() = ConstMatMap<T>(x.data(), n, din) * ConstMatMap<T>(weight.data(), din, dout);
    if (bias) out.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(bias->data(), dout);
    return y;
}

template <typename T>
DenseGrads<T> dense_vjp(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& dy) {
    const std::size_t n = x.dim(0), din = weight.dim(0), dout = weight.dim(1);
    detail::require(dy.shape() == Shape({n, dout}), "dense_vjp: upstream gradient shape " +
                                                        shape_str(dy.shape()));
    DenseGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(weight.shape()), Tensor<T>({dout})};
    ConstMatMap<T> xm(x.data(), n, din), wm(weight.data(), din, dout), dym(dy.data(), n, dout);
    MatMap<T>(g.input.data(), n, din).noalias() = dym * wm.transpose();
    MatMap<T>(g.weight.data(), din, dout).noalias() = xm.transpose() * dym;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < dout; ++j) g.bias[j] += dym(i, j);
    return g;
}

enum class Activation { Relu, Sigmoid };

template <typename T>
T sigmoid(T x) {
    // Stable in both tails; clamped so the result stays strictly inside (0, 1)
    // even where the exact value rounds to 0 or 1 in T.
    T s;
    if (x >= T{0}) {
        s = T{1} / (T{1} + std::exp(-x));
    } else {
        const T e = std::exp(x);
        s = e / (T{1} + e);
    }
    constexpr T lo = std::numeric_limits<T>::min();
    constexpr T hi = T{1} - std::numeric_limits<T>::epsilon() / T{2};
    return std::clamp(s, lo, hi);
}

template <typename T>
Tensor<T> activate(const Tensor<T>& x, Activation kind) {
    Tensor<T> y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = kind == Activation::Relu ? std::max(x[i], T{0}) : sigmoid(x[i]);
    }
    return y;
}

/// Gradient through an activation, expressed with the forward output.
template <typename T>
Tensor<T> activate_vjp(const Tensor<T>& y, Activation kind, const Tensor<T>& dy) {
    detail::require(y.shape() == dy.shape(), "activation_vjp: upstream gradient shape mismatch");
    Tensor<T> dx(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
        dx[i] = kind == Activation::Relu ? (y[i] > T{0} ? dy[i] : T{0}) : dy[i] * y[i] * (T{1} - y[i]);
    }
    return dx;
}

}  // namespace bvae::core

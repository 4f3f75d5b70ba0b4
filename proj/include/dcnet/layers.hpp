#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "dcnet/errors.hpp"
#include "dcnet/kernels.hpp"
#include "dcnet/tensor.hpp"

namespace dcnet {

// Per-side padding applied before a convolution.
struct Pad {
    int64_t top = 0, left = 0, bottom = 0, right = 0;
};

// Pads bottom/right only. With stride 1 this is the minimal padding that
// keeps the spatial dims of a k x k convolution unchanged.
inline Pad same_pad_bottom_right(int64_t k) { return Pad{0, 0, k - 1, k - 1}; }

// Which implementation route to take. The naive loops are the reference;
// the fast route lowers to GEMM and must agree within 1e-10 in double.
enum class Backend { naive, fast };

// Square kernel with weights (k, k, c_in, c_out) and bias (1, 1, 1, c_out).
template <typename T>
struct ConvKernel {
    Tensor4<T> weights;
    Tensor4<T> bias;
    int64_t stride = 1;

    int64_t k() const { return weights.shape().b; }
    int64_t c_in() const { return weights.shape().w; }
    int64_t c_out() const { return weights.shape().c; }

    void validate() const {
        if (weights.shape().b != weights.shape().h)
            throw ParamError("kernel must be square, got " + weights.shape().str());
        if (!(bias.shape() == Shape4{1, 1, 1, c_out()}))
            throw ShapeError("bias shape " + bias.shape().str() + " does not match c_out " +
                             std::to_string(c_out()));
        if (stride < 1) throw ParamError("stride must be >= 1");
    }
};

template <typename T>
struct ConvGrads {
    Tensor4<T> dx;
    Tensor4<T> dweights;
    Tensor4<T> dbias;
};

namespace detail {

inline int64_t conv_out_dim(int64_t in, int64_t pad_lo, int64_t pad_hi, int64_t k,
                            int64_t s) {
    const int64_t padded = in + pad_lo + pad_hi;
    if (padded < k)
        throw ShapeError("padded input dim " + std::to_string(padded) +
                         " smaller than kernel " + std::to_string(k));
    if ((padded - k) % s != 0)
        throw ShapeError("convolution output dim is not integral: (" +
                         std::to_string(padded) + " - " + std::to_string(k) + ") / " +
                         std::to_string(s));
    return (padded - k) / s + 1;
}

template <typename T>
void check_channels(const Tensor4<T>& x, const ConvKernel<T>& kern) {
    kern.validate();
    if (x.shape().c != kern.c_in())
        throw ShapeError("input channels " + std::to_string(x.shape().c) +
                         " do not match kernel c_in " + std::to_string(kern.c_in()));
}

// Patch matrix for one sample: cols[(m*OW + n)][(p*k + q)*C + c] is the
// padded input value under kernel tap (p, q) at output cell (m, n).
template <typename T>
void im2col(const T* x, int64_t H, int64_t W, int64_t C, int64_t k, int64_t s,
            const Pad& pad, int64_t OH, int64_t OW, T* cols) {
    for (int64_t m = 0; m < OH; ++m) {
        for (int64_t n = 0; n < OW; ++n) {
            T* row = cols + (m * OW + n) * (k * k * C);
            for (int64_t p = 0; p < k; ++p) {
                const int64_t i = m * s + p - pad.top;
                for (int64_t q = 0; q < k; ++q) {
                    const int64_t j = n * s + q - pad.left;
                    T* dst = row + (p * k + q) * C;
                    if (i >= 0 && i < H && j >= 0 && j < W)
                        std::copy_n(x + (i * W + j) * C, C, dst);
                    else
                        std::fill_n(dst, C, T(0));
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-adds patch-matrix entries back into the image.
template <typename T>
void col2im_add(const T* cols, int64_t H, int64_t W, int64_t C, int64_t k, int64_t s,
                const Pad& pad, int64_t OH, int64_t OW, T* x) {
    for (int64_t m = 0; m < OH; ++m) {
        for (int64_t n = 0; n < OW; ++n) {
            const T* row = cols + (m * OW + n) * (k * k * C);
            for (int64_t p = 0; p < k; ++p) {
                const int64_t i = m * s + p - pad.top;
                if (i < 0 || i >= H) continue;
                for (int64_t q = 0; q < k; ++q) {
                    const int64_t j = n * s + q - pad.left;
                    if (j < 0 || j >= W) continue;
                    const T* src = row + (p * k + q) * C;
                    T* dst = x + (i * W + j) * C;
                    for (int64_t c = 0; c < C; ++c) dst[c] += src[c];
                }
            }
        }
    }
}

// Gather for the deconvolution fast path: rows are input cells (m, n) of the
// deconv, columns run over (p, q, co) taps of the output gradient. All taps
// land inside the (H-1)*s + k output, so no bounds checks are needed.
template <typename T>
void deconv_gather(const T* g, int64_t OW, int64_t Co, int64_t H, int64_t W, int64_t k,
                   int64_t s, T* cols) {
    for (int64_t m = 0; m < H; ++m) {
        for (int64_t n = 0; n < W; ++n) {
            T* row = cols + (m * W + n) * (k * k * Co);
            for (int64_t p = 0; p < k; ++p) {
                for (int64_t q = 0; q < k; ++q) {
                    const T* src = g + ((m * s + p) * OW + (n * s + q)) * Co;
                    std::copy_n(src, Co, row + (p * k + q) * Co);
                }
            }
        }
    }
}

// Adjoint of deconv_gather: scatter-adds rows into the deconv output image.
template <typename T>
void deconv_scatter(const T* cols, int64_t OW, int64_t Co, int64_t H, int64_t W,
                    int64_t k, int64_t s, T* out) {
    for (int64_t m = 0; m < H; ++m) {
        for (int64_t n = 0; n < W; ++n) {
            const T* row = cols + (m * W + n) * (k * k * Co);
            for (int64_t p = 0; p < k; ++p) {
                for (int64_t q = 0; q < k; ++q) {
                    const T* src = row + (p * k + q) * Co;
                    T* dst = out + ((m * s + p) * OW + (n * s + q)) * Co;
                    for (int64_t c = 0; c < Co; ++c) dst[c] += src[c];
                }
            }
        }
    }
}

// Deconv weights (k, k, ci, co) rearranged to a (ci) x (k*k*co) matrix so the
// fast path can multiply input rows against it directly.
template <typename T>
std::vector<T> permute_deconv_weights(const ConvKernel<T>& kern) {
    const int64_t k = kern.k(), ci = kern.c_in(), co = kern.c_out();
    std::vector<T> w2(static_cast<size_t>(ci * k * k * co));
    const T* w = kern.weights.data();
    for (int64_t p = 0; p < k; ++p)
        for (int64_t q = 0; q < k; ++q)
            for (int64_t c = 0; c < ci; ++c)
                for (int64_t o = 0; o < co; ++o)
                    w2[(c * k * k + p * k + q) * co + o] = w[((p * k + q) * ci + c) * co + o];
    return w2;
}

}  // namespace detail

// ------------------------------------------------------------ convolution --

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const ConvKernel<T>& kern, const Pad& pad,
                          Backend backend = Backend::fast) {
    detail::check_channels(x, kern);
    const Shape4 xs = x.shape();
    const int64_t k = kern.k(), s = kern.stride, ci = kern.c_in(), co = kern.c_out();
    const int64_t OH = detail::conv_out_dim(xs.h, pad.top, pad.bottom, k, s);
    const int64_t OW = detail::conv_out_dim(xs.w, pad.left, pad.right, k, s);
    Tensor4<T> out(Shape4{xs.b, OH, OW, co});

    if (backend == Backend::naive) {
        const T* w = kern.weights.data();
        for (int64_t b = 0; b < xs.b; ++b)
            for (int64_t m = 0; m < OH; ++m)
                for (int64_t n = 0; n < OW; ++n)
                    for (int64_t o = 0; o < co; ++o) {
                        T acc = kern.bias.data()[o];
                        for (int64_t p = 0; p < k; ++p) {
                            const int64_t i = m * s + p - pad.top;
                            if (i < 0 || i >= xs.h) continue;
                            for (int64_t q = 0; q < k; ++q) {
                                const int64_t j = n * s + q - pad.left;
                                if (j < 0 || j >= xs.w) continue;
                                for (int64_t c = 0; c < ci; ++c)
                                    acc += w[((p * k + q) * ci + c) * co + o] *
                                           x.at(b, i, j, c);
                            }
                        }
                        out.at(b, m, n, o) = acc;
                    }
        return out;
    }

    // Fast route: per-sample im2col, then one GEMM against the weights, which
    // are already a (k*k*ci) x co matrix in memory.
    const auto& ops = kernels::ops<T>();
    const int64_t rows = OH * OW, K = k * k * ci;
    std::vector<T> cols(static_cast<size_t>(rows * K));
    for (int64_t b = 0; b < xs.b; ++b) {
        detail::im2col(x.data() + b * xs.h * xs.w * ci, xs.h, xs.w, ci, k, s, pad, OH, OW,
                       cols.data());
        T* out_b = out.data() + b * rows * co;
        ops.gemm_nn(rows, co, K, cols.data(), K, kern.weights.data(), co, out_b, co,
                    false);
        ops.add_bias(out_b, kern.bias.data(), rows, co);
    }
    return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& x, const ConvKernel<T>& kern,
                             const Pad& pad, const Tensor4<T>& gout,
                             Backend backend = Backend::fast) {
    detail::check_channels(x, kern);
    const Shape4 xs = x.shape();
    const int64_t k = kern.k(), s = kern.stride, ci = kern.c_in(), co = kern.c_out();
    const int64_t OH = detail::conv_out_dim(xs.h, pad.top, pad.bottom, k, s);
    const int64_t OW = detail::conv_out_dim(xs.w, pad.left, pad.right, k, s);
    if (!(gout.shape() == Shape4{xs.b, OH, OW, co}))
        throw ShapeError("conv2d_backward: upstream gradient shape " + gout.shape().str() +
                         " does not match forward output");

    ConvGrads<T> grads{Tensor4<T>(xs), Tensor4<T>(kern.weights.shape()),
                       Tensor4<T>(kern.bias.shape())};

    if (backend == Backend::naive) {
        const T* w = kern.weights.data();
        T* dw = grads.dweights.data();
        for (int64_t b = 0; b < xs.b; ++b)
            for (int64_t m = 0; m < OH; ++m)
                for (int64_t n = 0; n < OW; ++n)
                    for (int64_t o = 0; o < co; ++o) {
                        const T g = gout.at(b, m, n, o);
                        grads.dbias.data()[o] += g;
                        for (int64_t p = 0; p < k; ++p) {
                            const int64_t i = m * s + p - pad.top;
                            if (i < 0 || i >= xs.h) continue;
                            for (int64_t q = 0; q < k; ++q) {
                                const int64_t j = n * s + q - pad.left;
                                if (j < 0 || j >= xs.w) continue;
                                for (int64_t c = 0; c < ci; ++c) {
                                    dw[((p * k + q) * ci + c) * co + o] +=
                                        g * x.at(b, i, j, c);
                                    grads.dx.at(b, i, j, c) +=
                                        g * w[((p * k + q) * ci + c) * co + o];
                                }
                            }
                        }
                    }
        return grads;
    }

    const auto& ops = kernels::ops<T>();
    const int64_t rows = OH * OW, K = k * k * ci;
    std::vector<T> cols(static_cast<size_t>(rows * K));
    std::vector<T> dcols(static_cast<size_t>(rows * K));
    // Samples are walked in order and every reduction below accumulates in
    // that fixed order, so results do not depend on the worker count.
    for (int64_t b = 0; b < xs.b; ++b) {
        const T* g_b = gout.data() + b * rows * co;
        detail::im2col(x.data() + b * xs.h * xs.w * ci, xs.h, xs.w, ci, k, s, pad, OH, OW,
                       cols.data());
        ops.gemm_tn(K, co, rows, cols.data(), K, g_b, co, grads.dweights.data(), co,
                    true);
        ops.gemm_nt(rows, K, co, g_b, co, kern.weights.data(), co, dcols.data(), K,
                    false);
        detail::col2im_add(dcols.data(), xs.h, xs.w, ci, k, s, pad, OH, OW,
                           grads.dx.data() + b * xs.h * xs.w * ci);
    }
    ops.accum_rows(gout.data(), grads.dbias.data(), xs.b * rows, co);
    return grads;
}

// --------------------------------------------------- transposed convolution --

inline Shape4 deconv_out_shape(const Shape4& xs, int64_t k, int64_t s, int64_t co) {
    return Shape4{xs.b, (xs.h - 1) * s + k, (xs.w - 1) * s + k, co};
}

template <typename T>
Tensor4<T> deconv2d_forward(const Tensor4<T>& x, const ConvKernel<T>& kern,
                            Backend backend = Backend::fast) {
    detail::check_channels(x, kern);
    const Shape4 xs = x.shape();
    const int64_t k = kern.k(), s = kern.stride, ci = kern.c_in(), co = kern.c_out();
    const Shape4 os = deconv_out_shape(xs, k, s, co);
    Tensor4<T> out(os);

    if (backend == Backend::naive) {
        const T* w = kern.weights.data();
        for (int64_t b = 0; b < xs.b; ++b) {
            for (int64_t m = 0; m < xs.h; ++m)
                for (int64_t n = 0; n < xs.w; ++n)
                    for (int64_t c = 0; c < ci; ++c) {
                        const T v = x.at(b, m, n, c);
                        for (int64_t p = 0; p < k; ++p)
                            for (int64_t q = 0; q < k; ++q)
                                for (int64_t o = 0; o < co; ++o)
                                    out.at(b, m * s + p, n * s + q, o) +=
                                        v * w[((p * k + q) * ci + c) * co + o];
                    }
            for (int64_t i = 0; i < os.h; ++i)
                for (int64_t j = 0; j < os.w; ++j)
                    for (int64_t o = 0; o < co; ++o)
                        out.at(b, i, j, o) += kern.bias.data()[o];
        }
        return out;
    }

    // Fast route: rows of x times the permuted weight matrix give every
    // scattered contribution at once; deconv_scatter folds overlaps.
    const auto& ops = kernels::ops<T>();
    const auto w2 = detail::permute_deconv_weights(kern);
    const int64_t rows = xs.h * xs.w, N = k * k * co;
    std::vector<T> prod(static_cast<size_t>(rows * N));
    for (int64_t b = 0; b < xs.b; ++b) {
        ops.gemm_nn(rows, N, ci, x.data() + b * rows * ci, ci, w2.data(), N, prod.data(),
                    N, false);
        T* out_b = out.data() + b * os.h * os.w * co;
        detail::deconv_scatter(prod.data(), os.w, co, xs.h, xs.w, k, s, out_b);
        ops.add_bias(out_b, kern.bias.data(), os.h * os.w, co);
    }
    return out;
}

template <typename T>
ConvGrads<T> deconv2d_backward(const Tensor4<T>& x, const ConvKernel<T>& kern,
                               const Tensor4<T>& gout, Backend backend = Backend::fast) {
    detail::check_channels(x, kern);
    const Shape4 xs = x.shape();
    const int64_t k = kern.k(), s = kern.stride, ci = kern.c_in(), co = kern.c_out();
    const Shape4 os = deconv_out_shape(xs, k, s, co);
    if (!(gout.shape() == os))
        throw ShapeError("deconv2d_backward: upstream gradient shape " +
                         gout.shape().str() + " does not match forward output");

    ConvGrads<T> grads{Tensor4<T>(xs), Tensor4<T>(kern.weights.shape()),
                       Tensor4<T>(kern.bias.shape())};

    if (backend == Backend::naive) {
        const T* w = kern.weights.data();
        T* dw = grads.dweights.data();
        for (int64_t b = 0; b < xs.b; ++b)
            for (int64_t m = 0; m < xs.h; ++m)
                for (int64_t n = 0; n < xs.w; ++n)
                    for (int64_t c = 0; c < ci; ++c) {
                        T acc = T(0);
                        for (int64_t p = 0; p < k; ++p)
                            for (int64_t q = 0; q < k; ++q)
                                for (int64_t o = 0; o < co; ++o) {
                                    const T g = gout.at(b, m * s + p, n * s + q, o);
                                    acc += g * w[((p * k + q) * ci + c) * co + o];
                                    dw[((p * k + q) * ci + c) * co + o] +=
                                        g * x.at(b, m, n, c);
                                }
                        grads.dx.at(b, m, n, c) = acc;
                    }
        for (int64_t b = 0; b < xs.b; ++b)
            for (int64_t i = 0; i < os.h; ++i)
                for (int64_t j = 0; j < os.w; ++j)
                    for (int64_t o = 0; o < co; ++o)
                        grads.dbias.data()[o] += gout.at(b, i, j, o);
        return grads;
    }

    const auto& ops = kernels::ops<T>();
    const auto w2 = detail::permute_deconv_weights(kern);
    const int64_t rows = xs.h * xs.w, N = k * k * co;
    std::vector<T> colsg(static_cast<size_t>(rows * N));
    std::vector<T> dw2(static_cast<size_t>(ci * N), T(0));
    for (int64_t b = 0; b < xs.b; ++b) {
        const T* x_b = x.data() + b * rows * ci;
        detail::deconv_gather(gout.data() + b * os.h * os.w * co, os.w, co, xs.h, xs.w, k,
                              s, colsg.data());
        ops.gemm_nt(rows, ci, N, colsg.data(), N, w2.data(), N,
                    grads.dx.data() + b * rows * ci, ci, false);
        ops.gemm_tn(ci, N, rows, x_b, ci, colsg.data(), N, dw2.data(), N, true);
    }
    // Undo the weight permutation.
    T* dw = grads.dweights.data();
    for (int64_t p = 0; p < k; ++p)
        for (int64_t q = 0; q < k; ++q)
            for (int64_t c = 0; c < ci; ++c)
                for (int64_t o = 0; o < co; ++o)
                    dw[((p * k + q) * ci + c) * co + o] =
                        dw2[(c * k * k + p * k + q) * co + o];
    ops.accum_rows(gout.data(), grads.dbias.data(), xs.b * os.h * os.w, co);
    return grads;
}

// Brute-force reference for deconv2d_forward: insert s-1 zeros between input
// neurons, pad k-1 on every side, convolve with the spatially flipped kernel.
template <typename T>
Tensor4<T> deconv_as_conv_oracle(const Tensor4<T>& x, const ConvKernel<T>& kern) {
    detail::check_channels(x, kern);
    const Shape4 xs = x.shape();
    const int64_t k = kern.k(), s = kern.stride, ci = kern.c_in(), co = kern.c_out();

    Tensor4<T> xz(Shape4{xs.b, (xs.h - 1) * s + 1, (xs.w - 1) * s + 1, ci});
    for (int64_t b = 0; b < xs.b; ++b)
        for (int64_t m = 0; m < xs.h; ++m)
            for (int64_t n = 0; n < xs.w; ++n)
                for (int64_t c = 0; c < ci; ++c)
                    xz.at(b, m * s, n * s, c) = x.at(b, m, n, c);

    ConvKernel<T> flipped{Tensor4<T>(kern.weights.shape()), kern.bias, 1};
    for (int64_t p = 0; p < k; ++p)
        for (int64_t q = 0; q < k; ++q)
            for (int64_t c = 0; c < ci; ++c)
                for (int64_t o = 0; o < co; ++o)
                    flipped.weights.at(p, q, c, o) =
                        kern.weights.at(k - 1 - p, k - 1 - q, c, o);

    return conv2d_forward(xz, flipped, Pad{k - 1, k - 1, k - 1, k - 1}, Backend::naive);
}

// ----------------------------------------------------------------- pieces --

template <typename T>
Tensor4<T> relu(const Tensor4<T>& x) {
    Tensor4<T> y(x.shape());
    kernels::ops<T>().relu_forward(x.data(), y.data(), x.size());
    return y;
}

// Masks by the forward output, which has the same sign pattern as the input.
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& y, const Tensor4<T>& g) {
    if (!(y.shape() == g.shape()))
        throw ShapeError("relu_backward: shape mismatch " + y.shape().str() + " vs " +
                         g.shape().str());
    Tensor4<T> dx(y.shape());
    kernels::ops<T>().relu_backward(y.data(), g.data(), dx.data(), y.size());
    return dx;
}

// Flat input indices of each pooled maximum; ties go to the first cell in
// row-major window order so backward routing is deterministic.
struct PoolCache {
    Shape4 in_shape;
    std::vector<int64_t> argmax;
};

template <typename T>
std::pair<Tensor4<T>, PoolCache> maxpool2(const Tensor4<T>& x) {
    const Shape4 xs = x.shape();
    if (xs.h % 2 != 0 || xs.w % 2 != 0)
        throw ShapeError("maxpool2 requires even spatial dims, got " + xs.str());
    Tensor4<T> out(Shape4{xs.b, xs.h / 2, xs.w / 2, xs.c});
    PoolCache cache{xs, std::vector<int64_t>(static_cast<size_t>(out.size()))};
    int64_t cell = 0;
    for (int64_t b = 0; b < xs.b; ++b)
        for (int64_t m = 0; m < xs.h / 2; ++m)
            for (int64_t n = 0; n < xs.w / 2; ++n)
                for (int64_t c = 0; c < xs.c; ++c) {
                    int64_t best = x.offset(b, 2 * m, 2 * n, c);
                    T best_v = x.data()[best];
                    for (int64_t di = 0; di < 2; ++di)
                        for (int64_t dj = 0; dj < 2; ++dj) {
                            const int64_t idx = x.offset(b, 2 * m + di, 2 * n + dj, c);
                            if (x.data()[idx] > best_v) {
                                best_v = x.data()[idx];
                                best = idx;
                            }
                        }
                    out.data()[cell] = best_v;
                    cache.argmax[static_cast<size_t>(cell)] = best;
                    ++cell;
                }
    return {std::move(out), std::move(cache)};
}

template <typename T>
Tensor4<T> maxpool2_backward(const PoolCache& cache, const Tensor4<T>& g) {
    const Shape4 xs = cache.in_shape;
    if (static_cast<int64_t>(cache.argmax.size()) != g.size())
        throw StateError("maxpool2_backward: cache does not match gradient shape");
    Tensor4<T> dx(xs);
    for (int64_t i = 0; i < g.size(); ++i)
        dx.data()[cache.argmax[static_cast<size_t>(i)]] += g.data()[i];
    return dx;
}

// -------------------------------------------------------- fully connected --

template <typename T>
struct FcGrads {
    Tensor4<T> dx;
    Tensor4<T> dweights;
    Tensor4<T> dbias;
};

// weights (1, 1, flat_in, l); x is flattened per sample.
template <typename T>
Tensor4<T> fc_forward(const Tensor4<T>& x, const Tensor4<T>& weights,
                      const Tensor4<T>& bias) {
    const Shape4 xs = x.shape();
    const int64_t flat = xs.h * xs.w * xs.c;
    const int64_t l = weights.shape().c;
    if (weights.shape().w != flat || weights.shape().b != 1 || weights.shape().h != 1)
        throw ShapeError("fc weights " + weights.shape().str() + " incompatible with input " +
                         xs.str());
    if (!(bias.shape() == Shape4{1, 1, 1, l}))
        throw ShapeError("fc bias shape " + bias.shape().str());
    const auto& ops = kernels::ops<T>();
    Tensor4<T> out(Shape4{xs.b, 1, 1, l});
    ops.gemm_nn(xs.b, l, flat, x.data(), flat, weights.data(), l, out.data(), l, false);
    ops.add_bias(out.data(), bias.data(), xs.b, l);
    return out;
}

template <typename T>
FcGrads<T> fc_backward(const Tensor4<T>& x, const Tensor4<T>& weights,
                       const Tensor4<T>& g) {
    const Shape4 xs = x.shape();
    const int64_t flat = xs.h * xs.w * xs.c;
    const int64_t l = weights.shape().c;
    if (!(g.shape() == Shape4{xs.b, 1, 1, l}))
        throw ShapeError("fc_backward: upstream gradient shape " + g.shape().str());
    const auto& ops = kernels::ops<T>();
    FcGrads<T> grads{Tensor4<T>(xs), Tensor4<T>(weights.shape()),
                     Tensor4<T>(Shape4{1, 1, 1, l})};
    ops.gemm_tn(flat, l, xs.b, x.data(), flat, g.data(), l, grads.dweights.data(), l,
                false);
    ops.gemm_nt(xs.b, flat, l, g.data(), l, weights.data(), l, grads.dx.data(), flat,
                false);
    ops.accum_rows(g.data(), grads.dbias.data(), xs.b, l);
    return grads;
}

// ----------------------------------------------------------------- softmax --

// Row-wise exp-normalization with max subtraction; logits shape (b, 1, 1, M).
template <typename T>
Tensor4<T> softmax(const Tensor4<T>& logits) {
    const Shape4 s = logits.shape();
    if (s.h != 1 || s.w != 1)
        throw ShapeError("softmax expects (b,1,1,M) logits, got " + s.str());
    if (s.c < 2) throw ShapeError("softmax needs at least 2 classes");
    Tensor4<T> out(s);
    for (int64_t b = 0; b < s.b; ++b) {
        const T* in = logits.data() + b * s.c;
        T* o = out.data() + b * s.c;
        T mx = in[0];
        for (int64_t j = 1; j < s.c; ++j) mx = std::max(mx, in[j]);
        T total = T(0);
        for (int64_t j = 0; j < s.c; ++j) {
            o[j] = std::exp(in[j] - mx);
            total += o[j];
        }
        for (int64_t j = 0; j < s.c; ++j) o[j] /= total;
    }
    return out;
}

}  // namespace dcnet

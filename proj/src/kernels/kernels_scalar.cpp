// Scalar reference kernels. These are the ground truth the SIMD variants
// are tested against; keep them simple enough to audit by eye.

#include <cstdint>

#include "kernels_internal.hpp"

namespace dcnet::kernels {
namespace {

template <typename T>
void zero_region(T* C, int64_t M, int64_t N, int64_t ldc) {
    for (int64_t i = 0; i < M; ++i)
        for (int64_t j = 0; j < N; ++j) C[i * ldc + j] = T(0);
}

template <typename T>
void gemm_nn_scalar(int64_t M, int64_t N, int64_t K, const T* A, int64_t lda,
                    const T* B, int64_t ldb, T* C, int64_t ldc, bool accumulate) {
    if (!accumulate) zero_region(C, M, N, ldc);
    for (int64_t i = 0; i < M; ++i) {
        for (int64_t k = 0; k < K; ++k) {
            const T a = A[i * lda + k];
            const T* brow = B + k * ldb;
            T* crow = C + i * ldc;
            for (int64_t j = 0; j < N; ++j) crow[j] += a * brow[j];
        }
    }
}

template <typename T>
void gemm_nt_scalar(int64_t M, int64_t N, int64_t K, const T* A, int64_t lda,
                    const T* B, int64_t ldb, T* C, int64_t ldc, bool accumulate) {
    for (int64_t i = 0; i < M; ++i) {
        for (int64_t j = 0; j < N; ++j) {
            T acc = accumulate ? C[i * ldc + j] : T(0);
            const T* arow = A + i * lda;
            const T* brow = B + j * ldb;
            for (int64_t k = 0; k < K; ++k) acc += arow[k] * brow[k];
            C[i * ldc + j] = acc;
        }
    }
}

template <typename T>
void gemm_tn_scalar(int64_t M, int64_t N, int64_t K, const T* A, int64_t lda,
                    const T* B, int64_t ldb, T* C, int64_t ldc, bool accumulate) {
    if (!accumulate) zero_region(C, M, N, ldc);
    for (int64_t k = 0; k < K; ++k) {
        const T* arow = A + k * lda;
        const T* brow = B + k * ldb;
        for (int64_t i = 0; i < M; ++i) {
            const T a = arow[i];
            T* crow = C + i * ldc;
            for (int64_t j = 0; j < N; ++j) crow[j] += a * brow[j];
        }
    }
}

template <typename T>
void relu_forward_scalar(const T* x, T* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward_scalar(const T* y, const T* g, T* dx, int64_t n) {
    for (int64_t i = 0; i < n; ++i) dx[i] = y[i] > T(0) ? g[i] : T(0);
}

template <typename T>
void axpy_scalar(T a, const T* x, T* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
void add_bias_scalar(T* x, const T* bias, int64_t rows, int64_t c) {
    for (int64_t r = 0; r < rows; ++r) {
        T* row = x + r * c;
        for (int64_t j = 0; j < c; ++j) row[j] += bias[j];
    }
}

template <typename T>
void accum_rows_scalar(const T* x, T* acc, int64_t rows, int64_t c) {
    for (int64_t r = 0; r < rows; ++r) {
        const T* row = x + r * c;
        for (int64_t j = 0; j < c; ++j) acc[j] += row[j];
    }
}

template <typename T>
void sgd_update_scalar(T* w, T* v, const T* g, T lr, T mu, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        v[i] = mu * v[i] - lr * g[i];
        w[i] += v[i];
    }
}

template <typename T>
Ops<T> make_table() {
    Ops<T> t;
    t.gemm_nn = &gemm_nn_scalar<T>;
    t.gemm_nt = &gemm_nt_scalar<T>;
    t.gemm_tn = &gemm_tn_scalar<T>;
    t.relu_forward = &relu_forward_scalar<T>;
    t.relu_backward = &relu_backward_scalar<T>;
    t.axpy = &axpy_scalar<T>;
    t.add_bias = &add_bias_scalar<T>;
    t.accum_rows = &accum_rows_scalar<T>;
    t.sgd_update = &sgd_update_scalar<T>;
    return t;
}

}  // namespace

namespace detail {
const Ops<float>& scalar_ops_f32() {
    static const Ops<float> t = make_table<float>();
    return t;
}
const Ops<double>& scalar_ops_f64() {
    static const Ops<double> t = make_table<double>();
    return t;
}
}  // namespace detail

}  // namespace dcnet::kernels

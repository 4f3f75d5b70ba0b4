#pragma once

#include <cstdint>

namespace dcnet::kernels {

// Instruction-set level for the arithmetic kernels. One scalar reference
// implementation always exists; wider variants are selected at runtime and
// must stay numerically equivalent to it within test tolerances.
enum class Level { scalar, avx2, neon };

const char* level_name(Level lvl);
bool available(Level lvl);
Level best_available();

// Active level defaults to best_available(), overridable with the
// DCNET_SIMD environment variable ("scalar", "avx2", "neon", "auto").
Level active();
void set_active(Level lvl);

// Function table for one level. All matrices are row-major; GEMM regions
// are M x N in C with leading dimension ldc.
//   gemm_nn: C (+)= A[MxK] * B[KxN]
//   gemm_nt: C (+)= A[MxK] * B[NxK]^T
//   gemm_tn: C (+)= A[KxM]^T * B[KxN]
// accumulate=false overwrites the C region.
template <typename T>
struct Ops {
    using GemmFn = void (*)(int64_t M, int64_t N, int64_t K, const T* A, int64_t lda,
                            const T* B, int64_t ldb, T* C, int64_t ldc, bool accumulate);
    GemmFn gemm_nn = nullptr;
    GemmFn gemm_nt = nullptr;
    GemmFn gemm_tn = nullptr;

    void (*relu_forward)(const T* x, T* y, int64_t n) = nullptr;
    // dx[i] = y[i] > 0 ? g[i] : 0   (y is the forward output)
    void (*relu_backward)(const T* y, const T* g, T* dx, int64_t n) = nullptr;
    // y += a * x
    void (*axpy)(T a, const T* x, T* y, int64_t n) = nullptr;
    // rows of length c: x[r, :] += bias
    void (*add_bias)(T* x, const T* bias, int64_t rows, int64_t c) = nullptr;
    // acc[j] += sum_r x[r, j]
    void (*accum_rows)(const T* x, T* acc, int64_t rows, int64_t c) = nullptr;
    // v = mu*v - lr*g; w += v
    void (*sgd_update)(T* w, T* v, const T* g, T lr, T mu, int64_t n) = nullptr;
};

// Table for an explicit level (tests use this to compare variants).
// Requesting an unavailable level throws.
template <typename T>
const Ops<T>& ops(Level lvl);

// Table for the active level.
template <typename T>
inline const Ops<T>& ops() {
    return ops<T>(active());
}

}  // namespace dcnet::kernels

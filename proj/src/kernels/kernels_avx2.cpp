// AVX2+FMA kernels. The GEMM packs operand panels and runs a register-tiled
// micro-kernel; elementwise ops avoid FMA contraction on purpose so they stay
// bit-identical to the scalar reference (GEMM is tolerance-tested instead).
//
// Determinism contract: for a fixed input, results are bit-identical for any
// thread count. K blocks are walked serially and every C tile is written by
// exactly one task, so no accumulation order depends on scheduling.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>
#include <cstdint>
#include <vector>

#include "dcnet/threadpool.hpp"
#include "kernels_internal.hpp"

namespace dcnet::kernels {
namespace {

constexpr int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

// ---------------------------------------------------------------- GEMM ----

// 6x16 float micro-kernel: dst (+)= Ap * Bp over kc steps.
// Ap is k-major (Ap[k*6 + r]), Bp is k-major (Bp[k*16 + j]), both zero-padded.
void mk6x16_f32(int64_t kc, const float* Ap, const float* Bp, float* dst,
                int64_t ldd, bool add) {
    __m256 acc[6][2];
    for (auto& row : acc) row[0] = row[1] = _mm256_setzero_ps();
    for (int64_t k = 0; k < kc; ++k) {
        const __m256 b0 = _mm256_loadu_ps(Bp + k * 16);
        const __m256 b1 = _mm256_loadu_ps(Bp + k * 16 + 8);
        const float* arow = Ap + k * 6;
        for (int r = 0; r < 6; ++r) {
            const __m256 a = _mm256_broadcast_ss(arow + r);
            acc[r][0] = _mm256_fmadd_ps(a, b0, acc[r][0]);
            acc[r][1] = _mm256_fmadd_ps(a, b1, acc[r][1]);
        }
    }
    for (int r = 0; r < 6; ++r) {
        float* out = dst + r * ldd;
        if (add) {
            acc[r][0] = _mm256_add_ps(acc[r][0], _mm256_loadu_ps(out));
            acc[r][1] = _mm256_add_ps(acc[r][1], _mm256_loadu_ps(out + 8));
        }
        _mm256_storeu_ps(out, acc[r][0]);
        _mm256_storeu_ps(out + 8, acc[r][1]);
    }
}

// 6x8 double micro-kernel, same layout with NR=8.
void mk6x8_f64(int64_t kc, const double* Ap, const double* Bp, double* dst,
               int64_t ldd, bool add) {
    __m256d acc[6][2];
    for (auto& row : acc) row[0] = row[1] = _mm256_setzero_pd();
    for (int64_t k = 0; k < kc; ++k) {
        const __m256d b0 = _mm256_loadu_pd(Bp + k * 8);
        const __m256d b1 = _mm256_loadu_pd(Bp + k * 8 + 4);
        const double* arow = Ap + k * 6;
        for (int r = 0; r < 6; ++r) {
            const __m256d a = _mm256_broadcast_sd(arow + r);
            acc[r][0] = _mm256_fmadd_pd(a, b0, acc[r][0]);
            acc[r][1] = _mm256_fmadd_pd(a, b1, acc[r][1]);
        }
    }
    for (int r = 0; r < 6; ++r) {
        double* out = dst + r * ldd;
        if (add) {
            acc[r][0] = _mm256_add_pd(acc[r][0], _mm256_loadu_pd(out));
            acc[r][1] = _mm256_add_pd(acc[r][1], _mm256_loadu_pd(out + 4));
        }
        _mm256_storeu_pd(out, acc[r][0]);
        _mm256_storeu_pd(out + 4, acc[r][1]);
    }
}

template <typename T>
struct GemmTraits;

template <>
struct GemmTraits<float> {
    static constexpr int MR = 6, NR = 16;
    static constexpr int64_t KC = 256, NC = 1024;
    static constexpr auto mk = &mk6x16_f32;
};

template <>
struct GemmTraits<double> {
    static constexpr int MR = 6, NR = 8;
    static constexpr int64_t KC = 256, NC = 512;
    static constexpr auto mk = &mk6x8_f64;
};

// One MR-row slice of A, zero-padded to MR, written k-major.
template <typename T, int MR>
void pack_a(const T* A, int64_t lda, bool transA, int64_t i0, int mr, int64_t k0,
            int64_t kc, T* Ap) {
    for (int64_t k = 0; k < kc; ++k) {
        T* out = Ap + k * MR;
        for (int r = 0; r < MR; ++r) {
            if (r < mr)
                out[r] = transA ? A[(k0 + k) * lda + (i0 + r)]
                                : A[(i0 + r) * lda + (k0 + k)];
            else
                out[r] = T(0);
        }
    }
}

// One NR-column panel of B, zero-padded to NR, written k-major.
template <typename T, int NR>
void pack_b_panel(const T* B, int64_t ldb, bool transB, int64_t k0, int64_t kc,
                  int64_t j0, int nr, T* Bp) {
    for (int64_t k = 0; k < kc; ++k) {
        T* out = Bp + k * NR;
        for (int j = 0; j < NR; ++j) {
            if (j < nr)
                out[j] = transB ? B[(j0 + j) * ldb + (k0 + k)]
                                : B[(k0 + k) * ldb + (j0 + j)];
            else
                out[j] = T(0);
        }
    }
}

template <typename T>
void merge_tile(const T* buf, int ldb, T* C, int64_t ldc, int mr, int nr, bool add) {
    for (int r = 0; r < mr; ++r) {
        const T* src = buf + r * ldb;
        T* dst = C + r * ldc;
        if (add)
            for (int j = 0; j < nr; ++j) dst[j] += src[j];
        else
            for (int j = 0; j < nr; ++j) dst[j] = src[j];
    }
}

template <typename T>
void gemm_packed(int64_t M, int64_t N, int64_t K, const T* A, int64_t lda,
                 const T* B, int64_t ldb, T* C, int64_t ldc, bool accumulate,
                 bool transA, bool transB) {
    using Tr = GemmTraits<T>;
    constexpr int MR = Tr::MR, NR = Tr::NR;
    if (M == 0 || N == 0) return;
    if (K == 0) {
        if (!accumulate)
            for (int64_t i = 0; i < M; ++i)
                for (int64_t j = 0; j < N; ++j) C[i * ldc + j] = T(0);
        return;
    }

    std::vector<T> Bp(static_cast<size_t>(Tr::KC) * ceil_div(std::min(Tr::NC, N), NR) * NR);
    const int64_t mpan = ceil_div(M, MR);

    for (int64_t jc = 0; jc < N; jc += Tr::NC) {
        const int64_t nc = std::min(Tr::NC, N - jc);
        const int64_t npan = ceil_div(nc, NR);
        for (int64_t kb = 0; kb < K; kb += Tr::KC) {
            const int64_t kc = std::min(Tr::KC, K - kb);
            const bool add = accumulate || kb > 0;

            parallel_for(npan, [&](int64_t p) {
                const int64_t j0 = jc + p * NR;
                const int nr = static_cast<int>(std::min<int64_t>(NR, jc + nc - j0));
                pack_b_panel<T, NR>(B, ldb, transB, kb, kc, j0, nr, Bp.data() + p * kc * NR);
            });

            parallel_for(mpan, [&](int64_t pi) {
                alignas(32) T Ap[MR * Tr::KC];
                const int64_t i0 = pi * MR;
                const int mr = static_cast<int>(std::min<int64_t>(MR, M - i0));
                pack_a<T, MR>(A, lda, transA, i0, mr, kb, kc, Ap);
                for (int64_t p = 0; p < npan; ++p) {
                    const int64_t j0 = jc + p * NR;
                    const int nr = static_cast<int>(std::min<int64_t>(NR, jc + nc - j0));
                    const T* bp = Bp.data() + p * kc * NR;
                    if (mr == MR && nr == NR) {
                        Tr::mk(kc, Ap, bp, C + i0 * ldc + j0, ldc, add);
                    } else {
                        alignas(32) T buf[MR * NR];
                        Tr::mk(kc, Ap, bp, buf, NR, false);
                        merge_tile(buf, NR, C + i0 * ldc + j0, ldc, mr, nr, add);
                    }
                }
            });
        }
    }
}

template <typename T>
void gemm_nn_avx2(int64_t M, int64_t N, int64_t K, const T* A, int64_t lda,
                  const T* B, int64_t ldb, T* C, int64_t ldc, bool accumulate) {
    gemm_packed(M, N, K, A, lda, B, ldb, C, ldc, accumulate, false, false);
}

template <typename T>
void gemm_nt_avx2(int64_t M, int64_t N, int64_t K, const T* A, int64_t lda,
                  const T* B, int64_t ldb, T* C, int64_t ldc, bool accumulate) {
    gemm_packed(M, N, K, A, lda, B, ldb, C, ldc, accumulate, false, true);
}

template <typename T>
void gemm_tn_avx2(int64_t M, int64_t N, int64_t K, const T* A, int64_t lda,
                  const T* B, int64_t ldb, T* C, int64_t ldc, bool accumulate) {
    gemm_packed(M, N, K, A, lda, B, ldb, C, ldc, accumulate, true, false);
}

// --------------------------------------------------------- elementwise ----
// Kept FMA-free so each element sees the same mul/add sequence as the scalar
// reference (bitwise equal results).

void relu_forward_f32(const float* x, float* y, int64_t n) {
    const __m256 zero = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_forward_f64(const double* x, double* y, int64_t n) {
    const __m256d zero = _mm256_setzero_pd();
    int64_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_f32(const float* y, const float* g, float* dx, int64_t n) {
    const __m256 zero = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(y + i), zero, _CMP_GT_OQ);
        _mm256_storeu_ps(dx + i, _mm256_and_ps(mask, _mm256_loadu_ps(g + i)));
    }
    for (; i < n; ++i) dx[i] = y[i] > 0.0f ? g[i] : 0.0f;
}

void relu_backward_f64(const double* y, const double* g, double* dx, int64_t n) {
    const __m256d zero = _mm256_setzero_pd();
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(y + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(dx + i, _mm256_and_pd(mask, _mm256_loadu_pd(g + i)));
    }
    for (; i < n; ++i) dx[i] = y[i] > 0.0 ? g[i] : 0.0;
}

void axpy_f32(float a, const float* x, float* y, int64_t n) {
    const __m256 av = _mm256_set1_ps(a);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 prod = _mm256_mul_ps(av, _mm256_loadu_ps(x + i));
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void axpy_f64(double a, const double* x, double* y, int64_t n) {
    const __m256d av = _mm256_set1_pd(a);
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
void add_bias_avx2(T* x, const T* bias, int64_t rows, int64_t c);

template <>
void add_bias_avx2<float>(float* x, const float* bias, int64_t rows, int64_t c) {
    for (int64_t r = 0; r < rows; ++r) {
        float* row = x + r * c;
        int64_t j = 0;
        for (; j + 8 <= c; j += 8)
            _mm256_storeu_ps(row + j,
                             _mm256_add_ps(_mm256_loadu_ps(row + j), _mm256_loadu_ps(bias + j)));
        for (; j < c; ++j) row[j] += bias[j];
    }
}

template <>
void add_bias_avx2<double>(double* x, const double* bias, int64_t rows, int64_t c) {
    for (int64_t r = 0; r < rows; ++r) {
        double* row = x + r * c;
        int64_t j = 0;
        for (; j + 4 <= c; j += 4)
            _mm256_storeu_pd(row + j,
                             _mm256_add_pd(_mm256_loadu_pd(row + j), _mm256_loadu_pd(bias + j)));
        for (; j < c; ++j) row[j] += bias[j];
    }
}

template <typename T>
void accum_rows_avx2(const T* x, T* acc, int64_t rows, int64_t c);

template <>
void accum_rows_avx2<float>(const float* x, float* acc, int64_t rows, int64_t c) {
    for (int64_t r = 0; r < rows; ++r) {
        const float* row = x + r * c;
        int64_t j = 0;
        for (; j + 8 <= c; j += 8)
            _mm256_storeu_ps(acc + j,
                             _mm256_add_ps(_mm256_loadu_ps(acc + j), _mm256_loadu_ps(row + j)));
        for (; j < c; ++j) acc[j] += row[j];
    }
}

template <>
void accum_rows_avx2<double>(const double* x, double* acc, int64_t rows, int64_t c) {
    for (int64_t r = 0; r < rows; ++r) {
        const double* row = x + r * c;
        int64_t j = 0;
        for (; j + 4 <= c; j += 4)
            _mm256_storeu_pd(acc + j,
                             _mm256_add_pd(_mm256_loadu_pd(acc + j), _mm256_loadu_pd(row + j)));
        for (; j < c; ++j) acc[j] += row[j];
    }
}

void sgd_update_f32(float* w, float* v, const float* g, float lr, float mu, int64_t n) {
    const __m256 muv = _mm256_set1_ps(mu);
    const __m256 lrv = _mm256_set1_ps(lr);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 step = _mm256_mul_ps(lrv, _mm256_loadu_ps(g + i));
        const __m256 vv =
            _mm256_sub_ps(_mm256_mul_ps(muv, _mm256_loadu_ps(v + i)), step);
        _mm256_storeu_ps(v + i, vv);
        _mm256_storeu_ps(w + i, _mm256_add_ps(_mm256_loadu_ps(w + i), vv));
    }
    for (; i < n; ++i) {
        v[i] = mu * v[i] - lr * g[i];
        w[i] += v[i];
    }
}

void sgd_update_f64(double* w, double* v, const double* g, double lr, double mu, int64_t n) {
    const __m256d muv = _mm256_set1_pd(mu);
    const __m256d lrv = _mm256_set1_pd(lr);
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d step = _mm256_mul_pd(lrv, _mm256_loadu_pd(g + i));
        const __m256d vv =
            _mm256_sub_pd(_mm256_mul_pd(muv, _mm256_loadu_pd(v + i)), step);
        _mm256_storeu_pd(v + i, vv);
        _mm256_storeu_pd(w + i, _mm256_add_pd(_mm256_loadu_pd(w + i), vv));
    }
    for (; i < n; ++i) {
        v[i] = mu * v[i] - lr * g[i];
        w[i] += v[i];
    }
}

}  // namespace

namespace detail {

const Ops<float>& avx2_ops_f32() {
    static const Ops<float> t = [] {
        Ops<float> o;
        o.gemm_nn = &gemm_nn_avx2<float>;
        o.gemm_nt = &gemm_nt_avx2<float>;
        o.gemm_tn = &gemm_tn_avx2<float>;
        o.relu_forward = &relu_forward_f32;
        o.relu_backward = &relu_backward_f32;
        o.axpy = &axpy_f32;
        o.add_bias = &add_bias_avx2<float>;
        o.accum_rows = &accum_rows_avx2<float>;
        o.sgd_update = &sgd_update_f32;
        return o;
    }();
    return t;
}

const Ops<double>& avx2_ops_f64() {
    static const Ops<double> t = [] {
        Ops<double> o;
        o.gemm_nn = &gemm_nn_avx2<double>;
        o.gemm_nt = &gemm_nt_avx2<double>;
        o.gemm_tn = &gemm_tn_avx2<double>;
        o.relu_forward = &relu_forward_f64;
        o.relu_backward = &relu_backward_f64;
        o.axpy = &axpy_f64;
        o.add_bias = &add_bias_avx2<double>;
        o.accum_rows = &accum_rows_avx2<double>;
        o.sgd_update = &sgd_update_f64;
        return o;
    }();
    return t;
}

}  // namespace detail

}  // namespace dcnet::kernels

#endif  // x86_64

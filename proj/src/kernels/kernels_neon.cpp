// NEON kernels for the elementwise ops. GEMM reuses the scalar reference on
// this path; the packed AVX2 GEMM has no NEON port yet.

#if defined(__aarch64__) || defined(__ARM_NEON)

#include <arm_neon.h>

#include <cstdint>

#include "kernels_internal.hpp"

namespace dcnet::kernels {
namespace {

void relu_forward_f32(const float* x, float* y, int64_t n) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vmaxq_f32(vld1q_f32(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_f32(const float* y, const float* g, float* dx, int64_t n) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const uint32x4_t mask = vcgtq_f32(vld1q_f32(y + i), zero);
        const float32x4_t gv = vld1q_f32(g + i);
        vst1q_f32(dx + i, vreinterpretq_f32_u32(
                              vandq_u32(mask, vreinterpretq_u32_f32(gv))));
    }
    for (; i < n; ++i) dx[i] = y[i] > 0.0f ? g[i] : 0.0f;
}

void axpy_f32(float a, const float* x, float* y, int64_t n) {
    const float32x4_t av = vdupq_n_f32(a);
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t prod = vmulq_f32(av, vld1q_f32(x + i));
        vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void add_bias_f32(float* x, const float* bias, int64_t rows, int64_t c) {
    for (int64_t r = 0; r < rows; ++r) {
        float* row = x + r * c;
        int64_t j = 0;
        for (; j + 4 <= c; j += 4)
            vst1q_f32(row + j, vaddq_f32(vld1q_f32(row + j), vld1q_f32(bias + j)));
        for (; j < c; ++j) row[j] += bias[j];
    }
}

void accum_rows_f32(const float* x, float* acc, int64_t rows, int64_t c) {
    for (int64_t r = 0; r < rows; ++r) {
        const float* row = x + r * c;
        int64_t j = 0;
        for (; j + 4 <= c; j += 4)
            vst1q_f32(acc + j, vaddq_f32(vld1q_f32(acc + j), vld1q_f32(row + j)));
        for (; j < c; ++j) acc[j] += row[j];
    }
}

void sgd_update_f32(float* w, float* v, const float* g, float lr, float mu, int64_t n) {
    const float32x4_t muv = vdupq_n_f32(mu);
    const float32x4_t lrv = vdupq_n_f32(lr);
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t step = vmulq_f32(lrv, vld1q_f32(g + i));
        const float32x4_t vv = vsubq_f32(vmulq_f32(muv, vld1q_f32(v + i)), step);
        vst1q_f32(v + i, vv);
        vst1q_f32(w + i, vaddq_f32(vld1q_f32(w + i), vv));
    }
    for (; i < n; ++i) {
        v[i] = mu * v[i] - lr * g[i];
        w[i] += v[i];
    }
}

#if defined(__aarch64__)
void relu_forward_f64(const double* x, double* y, int64_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    int64_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmaxq_f64(vld1q_f64(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_f64(const double* y, const double* g, double* dx, int64_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    int64_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const uint64x2_t mask = vcgtq_f64(vld1q_f64(y + i), zero);
        const float64x2_t gv = vld1q_f64(g + i);
        vst1q_f64(dx + i, vreinterpretq_f64_u64(
                              vandq_u64(mask, vreinterpretq_u64_f64(gv))));
    }
    for (; i < n; ++i) dx[i] = y[i] > 0.0 ? g[i] : 0.0;
}

void axpy_f64(double a, const double* x, double* y, int64_t n) {
    const float64x2_t av = vdupq_n_f64(a);
    int64_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t prod = vmulq_f64(av, vld1q_f64(x + i));
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void add_bias_f64(double* x, const double* bias, int64_t rows, int64_t c) {
    for (int64_t r = 0; r < rows; ++r) {
        double* row = x + r * c;
        int64_t j = 0;
        for (; j + 2 <= c; j += 2)
            vst1q_f64(row + j, vaddq_f64(vld1q_f64(row + j), vld1q_f64(bias + j)));
        for (; j < c; ++j) row[j] += bias[j];
    }
}

void accum_rows_f64(const double* x, double* acc, int64_t rows, int64_t c) {
    for (int64_t r = 0; r < rows; ++r) {
        const double* row = x + r * c;
        int64_t j = 0;
        for (; j + 2 <= c; j += 2)
            vst1q_f64(acc + j, vaddq_f64(vld1q_f64(acc + j), vld1q_f64(row + j)));
        for (; j < c; ++j) acc[j] += row[j];
    }
}

void sgd_update_f64(double* w, double* v, const double* g, double lr, double mu, int64_t n) {
    const float64x2_t muv = vdupq_n_f64(mu);
    const float64x2_t lrv = vdupq_n_f64(lr);
    int64_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t step = vmulq_f64(lrv, vld1q_f64(g + i));
        const float64x2_t vv = vsubq_f64(vmulq_f64(muv, vld1q_f64(v + i)), step);
        vst1q_f64(v + i, vv);
        vst1q_f64(w + i, vaddq_f64(vld1q_f64(w + i), vv));
    }
    for (; i < n; ++i) {
        v[i] = mu * v[i] - lr * g[i];
        w[i] += v[i];
    }
}
#endif  // __aarch64__

}  // namespace

namespace detail {

const Ops<float>& neon_ops_f32() {
    static const Ops<float> t = [] {
        Ops<float> o = scalar_ops_f32();  // GEMM stays on the scalar path
        o.relu_forward = &relu_forward_f32;
        o.relu_backward = &relu_backward_f32;
        o.axpy = &axpy_f32;
        o.add_bias = &add_bias_f32;
        o.accum_rows = &accum_rows_f32;
        o.sgd_update = &sgd_update_f32;
        return o;
    }();
    return t;
}

const Ops<double>& neon_ops_f64() {
    static const Ops<double> t = [] {
        Ops<double> o = scalar_ops_f64();
#if defined(__aarch64__)
        o.relu_forward = &relu_forward_f64;
        o.relu_backward = &relu_backward_f64;
        o.axpy = &axpy_f64;
        o.add_bias = &add_bias_f64;
        o.accum_rows = &accum_rows_f64;
        o.sgd_update = &sgd_update_f64;
#endif
        return o;
    }();
    return t;
}

}  // namespace detail

}  // namespace dcnet::kernels

#endif  // NEON

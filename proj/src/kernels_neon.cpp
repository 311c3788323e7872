#include "tplab/kernels.hpp"

// NEON variants for aarch64, where 128-bit SIMD is baseline.

#if defined(__aarch64__)

#include <arm_neon.h>

namespace tplab::kern::detail {

namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
    double total = vaddvq_f64(acc);
    for (; i < n; ++i) total += a[i] * b[i];
    return total;
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

double sq_dist_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
        acc = vfmaq_f64(acc, d, d);
    }
    double total = vaddvq_f64(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        total += d * d;
    }
    return total;
}

double sum_neon(const double* x, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
    double total = vaddvq_f64(acc);
    for (; i < n; ++i) total += x[i];
    return total;
}

double max_val_neon(const double* x, std::size_t n) {
    std::size_t i = 0;
    double m = x[0];
    if (n >= 2) {
        float64x2_t vm = vld1q_f64(x);
        for (i = 2; i + 2 <= n; i += 2) vm = vmaxq_f64(vm, vld1q_f64(x + i));
        m = vmaxvq_f64(vm);
    }
    for (; i < n; ++i) m = m > x[i] ? m : x[i];
    return m;
}

void scale_neon(double a, double* x, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

void relu_neon(const double* pre, double* out, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vmaxq_f64(zero, vld1q_f64(pre + i)));
    for (; i < n; ++i) out[i] = pre[i] > 0.0 ? pre[i] : 0.0;
}

void relu_grad_mask_neon(const double* pre, double* grad, std::size_t n) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const uint64x2_t keep = vcgtq_f64(vld1q_f64(pre + i), zero);
        const uint64x2_t g = vreinterpretq_u64_f64(vld1q_f64(grad + i));
        vst1q_f64(grad + i, vreinterpretq_f64_u64(vandq_u64(keep, g)));
    }
    for (; i < n; ++i)
        if (pre[i] <= 0.0) grad[i] = 0.0;
}

constexpr Ops kNeonOps = {
    dot_neon,  axpy_neon,    sq_dist_neon,
    sum_neon,  max_val_neon, scale_neon,
    relu_neon, relu_grad_mask_neon,
};

}  // namespace

const Ops* neon_ops() { return &kNeonOps; }

}  // namespace tplab::kern::detail

#else

namespace tplab::kern::detail {
const Ops* neon_ops() { return nullptr; }
}  // namespace tplab::kern::detail

#endif

#include "tplab/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#include "tplab/errors.hpp"

namespace tplab::kern {

// ==================== scalar reference ====================

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sq_dist_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double max_val_scalar(const double* x, std::size_t n) {
    double m = x[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, x[i]);
    return m;
}

void scale_scalar(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void relu_scalar(const double* pre, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = pre[i] > 0.0 ? pre[i] : 0.0;
}

void relu_grad_mask_scalar(const double* pre, double* grad, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (pre[i] <= 0.0) grad[i] = 0.0;
}

constexpr detail::Ops kScalarOps = {
    dot_scalar,     axpy_scalar,  sq_dist_scalar,
    sum_scalar,     max_val_scalar, scale_scalar,
    relu_scalar,    relu_grad_mask_scalar,
};

// ==================== dispatch ====================

struct Dispatch {
    Isa isa = Isa::scalar;
    const detail::Ops* ops = &kScalarOps;
};

Dispatch resolve() {
    Dispatch d;
    if (const detail::Ops* neon = detail::neon_ops()) {
        d.isa = Isa::neon;
        d.ops = neon;
    }
    if (const detail::Ops* avx2 = detail::avx2_ops()) {
        d.isa = Isa::avx2;
        d.ops = avx2;
    }
    if (const char* env = std::getenv("TPLAB_ISA")) {
        const std::string want(env);
        if (want == "scalar") {
            d = Dispatch{};
        } else if (want == "avx2") {
            if (const detail::Ops* avx2 = detail::avx2_ops()) {
                d.isa = Isa::avx2;
                d.ops = avx2;
            } else {
                throw ConfigError("TPLAB_ISA=avx2 requested but AVX2+FMA is unavailable");
            }
        } else if (want == "neon") {
            if (const detail::Ops* neon = detail::neon_ops()) {
                d.isa = Isa::neon;
                d.ops = neon;
            } else {
                throw ConfigError("TPLAB_ISA=neon requested but NEON is unavailable");
            }
        } else if (!want.empty()) {
            throw ConfigError("unknown TPLAB_ISA value: " + want);
        }
    }
    return d;
}

Dispatch& dispatch() {
    static Dispatch d = resolve();
    return d;
}

}  // namespace

namespace detail {
const Ops& scalar_ops() { return kScalarOps; }
}  // namespace detail

Isa active_isa() { return dispatch().isa; }

const char* isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "?";
}

void force_isa(Isa isa) {
    Dispatch& d = dispatch();
    switch (isa) {
        case Isa::scalar:
            d = Dispatch{};
            return;
        case Isa::avx2:
            if (const detail::Ops* ops = detail::avx2_ops()) {
                d.isa = Isa::avx2;
                d.ops = ops;
                return;
            }
            throw ConfigError("AVX2+FMA is unavailable on this host");
        case Isa::neon:
            if (const detail::Ops* ops = detail::neon_ops()) {
                d.isa = Isa::neon;
                d.ops = ops;
                return;
            }
            throw ConfigError("NEON is unavailable on this host");
    }
}

double dot(const double* a, const double* b, std::size_t n) {
    return dispatch().ops->dot(a, b, n);
}
void axpy(double a, const double* x, double* y, std::size_t n) {
    dispatch().ops->axpy(a, x, y, n);
}
double sq_dist(const double* a, const double* b, std::size_t n) {
    return dispatch().ops->sq_dist(a, b, n);
}
double sum(const double* x, std::size_t n) { return dispatch().ops->sum(x, n); }
double max_val(const double* x, std::size_t n) { return dispatch().ops->max_val(x, n); }
void scale(double a, double* x, std::size_t n) { dispatch().ops->scale(a, x, n); }
void relu(const double* pre, double* out, std::size_t n) {
    dispatch().ops->relu(pre, out, n);
}
void relu_grad_mask(const double* pre, double* grad, std::size_t n) {
    dispatch().ops->relu_grad_mask(pre, grad, n);
}

// Matrix helpers are thin loops over the dispatched vector kernels; rows are
// contiguous so each inner call runs the SIMD path when one is active.

void matvec(const double* w, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        y[r] = dot(w + r * cols, x, cols) + (b ? b[r] : 0.0);
}

void matvec_t_acc(const double* w, const double* d, double* out,
                  std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        axpy(d[r], w + r * cols, out, cols);
}

void ger_acc(double* w, const double* d, const double* x,
             std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r)
        axpy(d[r], x, w + r * cols, cols);
}

}  // namespace tplab::kern

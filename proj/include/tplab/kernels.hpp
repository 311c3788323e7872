#pragma once

#include <cstddef>

// Dense double-precision kernels behind the model, the selection strategies
// and the metrics. Every operation has a scalar reference implementation and,
// where the host supports it, a SIMD variant (AVX2+FMA on x86-64, NEON on
// aarch64). The active variant is picked once at startup from CPU feature
// detection; TPLAB_ISA=scalar|avx2|neon overrides it. SIMD results may differ
// from scalar ones by reassociation rounding only; equivalence is pinned by
// tests. Within one process the dispatch never changes, so repeated runs of
// the same work produce identical bytes.
namespace tplab::kern {

enum class Isa { scalar, avx2, neon };

Isa active_isa();
const char* isa_name(Isa isa);

// Test hook: force a variant. Throws ConfigError if unsupported on this host.
void force_isa(Isa isa);

double dot(const double* a, const double* b, std::size_t n);

// y += a * x
void axpy(double a, const double* x, double* y, std::size_t n);

double sq_dist(const double* a, const double* b, std::size_t n);

double sum(const double* x, std::size_t n);

double max_val(const double* x, std::size_t n);

void scale(double a, double* x, std::size_t n);

// out[i] = max(pre[i], 0)
void relu(const double* pre, double* out, std::size_t n);

// grad[i] = pre[i] > 0 ? grad[i] : 0
void relu_grad_mask(const double* pre, double* grad, std::size_t n);

// y = W x + b, W row-major rows x cols. b may be nullptr.
void matvec(const double* w, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols);

// out += W^T d, W row-major rows x cols, d length rows, out length cols.
void matvec_t_acc(const double* w, const double* d, double* out,
                  std::size_t rows, std::size_t cols);

// W += d x^T (rank-one update of a row-major rows x cols matrix).
void ger_acc(double* w, const double* d, const double* x,
             std::size_t rows, std::size_t cols);

namespace detail {
struct Ops {
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    double (*sq_dist)(const double*, const double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    double (*max_val)(const double*, std::size_t);
    void (*scale)(double, double*, std::size_t);
    void (*relu)(const double*, double*, std::size_t);
    void (*relu_grad_mask)(const double*, double*, std::size_t);
};
const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when the build or host lacks AVX2+FMA
const Ops* neon_ops();  // nullptr off aarch64
}  // namespace detail

}  // namespace tplab::kern

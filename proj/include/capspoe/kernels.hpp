#pragma once

#include <cstddef>

namespace capspoe::kernels {

/// Numeric inner-loop backends. Scalar is the reference implementation;
/// SIMD variants are selected at runtime when the CPU supports them and are
/// equivalence-tested against scalar.
enum class Backend {
    Scalar,
    Avx2,
};

const char* backend_name(Backend b);
bool backend_available(Backend b);

/// Active backend. Defaults to the best available one; the CAPSPOE_KERNELS
/// environment variable (scalar|avx2|auto) or set_backend() overrides.
Backend active_backend();
void set_backend(Backend b);

/// Parses "scalar" / "avx2" / "auto" and applies it. Throws ConfigError on
/// unknown names or unavailable backends.
void set_backend_by_name(const char* name);

/// RAII backend pin for tests.
struct BackendScope {
    explicit BackendScope(Backend b);
    ~BackendScope();
    Backend saved;
};

/// Raw inner-loop kernels. All take plain pointers; shape checking lives in
/// the Tensor-level wrappers. Every kernel reduces in a fixed order, so a
/// given backend is deterministic.
struct KernelTable {
    // y[0..n) += a * x[0..n)
    void (*axpy)(std::size_t n, double a, const double* x, double* y);

    // left-to-right dot product (scalar); lane-blocked fixed order (SIMD)
    double (*dot)(std::size_t n, const double* x, const double* y);

    // z = M · x, M row-major rows x cols
    void (*matvec)(std::size_t rows, std::size_t cols, const double* m, const double* x,
                   double* z);

    // z = Mᵀ · x, x has rows entries, z has cols entries
    void (*matvec_t)(std::size_t rows, std::size_t cols, const double* m, const double* x,
                     double* z);

    // G(rows x cols) += a * u ⊗ v
    void (*outer_accum)(std::size_t rows, std::size_t cols, double a, const double* u,
                        const double* v, double* g);

    // v ← mom·v − lr·(g + l2·p); p ← p + v. Plain mul/add (no FMA) in every
    // backend, so all backends produce bit-identical updates.
    void (*sgd_update)(std::size_t n, double* p, double* v, const double* g, double lr,
                       double mom, double l2);

    // Valid cross-correlation. Input is [h][w][cin] row-major, filters are
    // [kh][kw][cin][cout], output [oh][ow][cout] with oh = (h-kh)/stride + 1.
    void (*conv2d_forward)(const double* in, std::size_t h, std::size_t w, std::size_t cin,
                           const double* filt, std::size_t kh, std::size_t kw, std::size_t cout,
                           std::size_t stride, double* out, std::size_t oh, std::size_t ow);

    // Gradient of conv2d_forward w.r.t. its input; gin must be zeroed by the
    // caller contract (the kernel overwrites by accumulation).
    void (*conv2d_grad_input)(const double* up, std::size_t oh, std::size_t ow, std::size_t cout,
                              const double* filt, std::size_t kh, std::size_t kw, std::size_t cin,
                              std::size_t stride, double* gin, std::size_t h, std::size_t w);

    // Gradient of conv2d_forward w.r.t. the filters; gfilt accumulated.
    void (*conv2d_grad_filters)(const double* in, std::size_t h, std::size_t w, std::size_t cin,
                                const double* up, std::size_t oh, std::size_t ow,
                                std::size_t cout, std::size_t kh, std::size_t kw,
                                std::size_t stride, double* gfilt);
};

/// Table for the active backend.
const KernelTable& table();

/// Tables for a specific backend (equivalence tests compare these).
const KernelTable& table_for(Backend b);

} // namespace capspoe::kernels

// Reference kernels. They define the arithmetic contract: reductions run in
// 4-lane-blocked order (four interleaved partial sums combined as
// (a0+a1)+(a2+a3), then a sequential tail), products and sums are plain IEEE
// mul/add with contraction off. SIMD backends implement the same order with
// vector lanes, so every backend produces bit-identical results.

#include "capspoe/kernels.hpp"

namespace capspoe::kernels {

namespace {

void axpy_scalar(std::size_t n, double a, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_scalar(std::size_t n, const double* x, const double* y) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t nb = n & ~std::size_t(3);
    for (std::size_t i = 0; i < nb; i += 4) {
        a0 += x[i] * y[i];
        a1 += x[i + 1] * y[i + 1];
        a2 += x[i + 2] * y[i + 2];
        a3 += x[i + 3] * y[i + 3];
    }
    double acc = (a0 + a1) + (a2 + a3);
    for (std::size_t i = nb; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void matvec_scalar(std::size_t rows, std::size_t cols, const double* m, const double* x,
                   double* z) {
    for (std::size_t r = 0; r < rows; ++r) z[r] = dot_scalar(cols, m + r * cols, x);
}

void matvec_t_scalar(std::size_t rows, std::size_t cols, const double* m, const double* x,
                     double* z) {
    for (std::size_t c = 0; c < cols; ++c) z[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) axpy_scalar(cols, x[r], m + r * cols, z);
}

void outer_accum_scalar(std::size_t rows, std::size_t cols, double a, const double* u,
                        const double* v, double* g) {
    for (std::size_t r = 0; r < rows; ++r) axpy_scalar(cols, a * u[r], v, g + r * cols);
}

void sgd_update_scalar(std::size_t n, double* p, double* v, const double* g, double lr,
                       double mom, double l2) {
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = mom * v[i] - lr * (g[i] + l2 * p[i]);
        p[i] = p[i] + v[i];
    }
}

void conv2d_forward_scalar(const double* in, std::size_t h, std::size_t w, std::size_t cin,
                           const double* filt, std::size_t kh, std::size_t kw, std::size_t cout,
                           std::size_t stride, double* out, std::size_t oh, std::size_t ow) {
    (void)h;
    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            double* acc = out + (oy * ow + ox) * cout;
            for (std::size_t c = 0; c < cout; ++c) acc[c] = 0.0;
            for (std::size_t ky = 0; ky < kh; ++ky) {
                const double* in_row = in + ((oy * stride + ky) * w + ox * stride) * cin;
                const double* f_row = filt + ky * kw * cin * cout;
                for (std::size_t kx = 0; kx < kw; ++kx) {
                    for (std::size_t c = 0; c < cin; ++c) {
                        axpy_scalar(cout, in_row[kx * cin + c],
                                    f_row + (kx * cin + c) * cout, acc);
                    }
                }
            }
        }
    }
}

void conv2d_grad_input_scalar(const double* up, std::size_t oh, std::size_t ow, std::size_t cout,
                              const double* filt, std::size_t kh, std::size_t kw, std::size_t cin,
                              std::size_t stride, double* gin, std::size_t h, std::size_t w) {
    for (std::size_t i = 0; i < h * w * cin; ++i) gin[i] = 0.0;
    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            const double* u = up + (oy * ow + ox) * cout;
            for (std::size_t ky = 0; ky < kh; ++ky) {
                double* g_row = gin + ((oy * stride + ky) * w + ox * stride) * cin;
                const double* f_row = filt + ky * kw * cin * cout;
                for (std::size_t kx = 0; kx < kw; ++kx) {
                    for (std::size_t c = 0; c < cin; ++c) {
                        g_row[kx * cin + c] +=
                            dot_scalar(cout, f_row + (kx * cin + c) * cout, u);
                    }
                }
            }
        }
    }
}

void conv2d_grad_filters_scalar(const double* in, std::size_t h, std::size_t w, std::size_t cin,
                                const double* up, std::size_t oh, std::size_t ow,
                                std::size_t cout, std::size_t kh, std::size_t kw,
                                std::size_t stride, double* gfilt) {
    (void)h;
    for (std::size_t i = 0; i < kh * kw * cin * cout; ++i) gfilt[i] = 0.0;
    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            const double* u = up + (oy * ow + ox) * cout;
            for (std::size_t ky = 0; ky < kh; ++ky) {
                const double* in_row = in + ((oy * stride + ky) * w + ox * stride) * cin;
                double* g_row = gfilt + ky * kw * cin * cout;
                for (std::size_t kx = 0; kx < kw; ++kx) {
                    for (std::size_t c = 0; c < cin; ++c) {
                        axpy_scalar(cout, in_row[kx * cin + c], u,
                                    g_row + (kx * cin + c) * cout);
                    }
                }
            }
        }
    }
}

} // namespace

const KernelTable& scalar_table() {
    static const KernelTable t = {
        axpy_scalar,         dot_scalar,
        matvec_scalar,       matvec_t_scalar,
        outer_accum_scalar,  sgd_update_scalar,
        conv2d_forward_scalar, conv2d_grad_input_scalar, conv2d_grad_filters_scalar,
    };
    return t;
}

} // namespace capspoe::kernels

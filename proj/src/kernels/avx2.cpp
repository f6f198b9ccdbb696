// AVX2 variants. Same arithmetic contract as the scalar reference: 4-lane
// blocked reductions combined as (a0+a1)+(a2+a3), separate mul/add (no FMA),
// sequential tails. Results are bit-identical to scalar; the speedup comes
// purely from doing four lanes per instruction. This TU is compiled with
// -mavx2 and only entered when the CPU reports AVX2.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "capspoe/kernels.hpp"

namespace capspoe::kernels {

namespace {

double hsum_blocked(__m256d acc) {
    alignas(32) double lane[4];
    _mm256_store_pd(lane, acc);
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

void axpy_avx2(std::size_t n, double a, const double* x, double* y) {
    __m256d va = _mm256_set1_pd(a);
    std::size_t nb = n & ~std::size_t(3);
    for (std::size_t i = 0; i < nb; i += 4) {
        __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (std::size_t i = nb; i < n; ++i) y[i] += a * x[i];
}

double dot_avx2(std::size_t n, const double* x, const double* y) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t nb = n & ~std::size_t(3);
    for (std::size_t i = 0; i < nb; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    double r = hsum_blocked(acc);
    for (std::size_t i = nb; i < n; ++i) r += x[i] * y[i];
    return r;
}

void matvec_avx2(std::size_t rows, std::size_t cols, const double* m, const double* x,
                 double* z) {
    for (std::size_t r = 0; r < rows; ++r) z[r] = dot_avx2(cols, m + r * cols, x);
}

void matvec_t_avx2(std::size_t rows, std::size_t cols, const double* m, const double* x,
                   double* z) {
    for (std::size_t c = 0; c < cols; ++c) z[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) axpy_avx2(cols, x[r], m + r * cols, z);
}

void outer_accum_avx2(std::size_t rows, std::size_t cols, double a, const double* u,
                      const double* v, double* g) {
    for (std::size_t r = 0; r < rows; ++r) axpy_avx2(cols, a * u[r], v, g + r * cols);
}

void sgd_update_avx2(std::size_t n, double* p, double* v, const double* g, double lr,
                     double mom, double l2) {
    __m256d vlr = _mm256_set1_pd(lr);
    __m256d vmom = _mm256_set1_pd(mom);
    __m256d vl2 = _mm256_set1_pd(l2);
    std::size_t nb = n & ~std::size_t(3);
    for (std::size_t i = 0; i < nb; i += 4) {
        __m256d pi = _mm256_loadu_pd(p + i);
        __m256d vi = _mm256_loadu_pd(v + i);
        __m256d gi = _mm256_loadu_pd(g + i);
        __m256d reg = _mm256_add_pd(gi, _mm256_mul_pd(vl2, pi));
        vi = _mm256_sub_pd(_mm256_mul_pd(vmom, vi), _mm256_mul_pd(vlr, reg));
        _mm256_storeu_pd(v + i, vi);
        _mm256_storeu_pd(p + i, _mm256_add_pd(pi, vi));
    }
    for (std::size_t i = nb; i < n; ++i) {
        v[i] = mom * v[i] - lr * (g[i] + l2 * p[i]);
        p[i] = p[i] + v[i];
    }
}

// Per output channel the accumulation order over (ky,kx,cin) matches the
// scalar reference exactly; channels are independent lanes. Full 16-channel
// tiles stay in registers, the remainder runs per channel.
void conv2d_forward_avx2(const double* in, std::size_t h, std::size_t w, std::size_t cin,
                         const double* filt, std::size_t kh, std::size_t kw, std::size_t cout,
                         std::size_t stride, double* out, std::size_t oh, std::size_t ow) {
    (void)h;
    std::size_t ct = cout & ~std::size_t(15);
    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            double* acc_out = out + (oy * ow + ox) * cout;
            for (std::size_t c0 = 0; c0 < ct; c0 += 16) {
                __m256d a0 = _mm256_setzero_pd();
                __m256d a1 = _mm256_setzero_pd();
                __m256d a2 = _mm256_setzero_pd();
                __m256d a3 = _mm256_setzero_pd();
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    const double* in_row = in + ((oy * stride + ky) * w + ox * stride) * cin;
                    const double* f_row = filt + ky * kw * cin * cout;
                    for (std::size_t kc = 0; kc < kw * cin; ++kc) {
                        __m256d b = _mm256_set1_pd(in_row[kc]);
                        const double* fp = f_row + kc * cout + c0;
                        a0 = _mm256_add_pd(a0, _mm256_mul_pd(b, _mm256_loadu_pd(fp)));
                        a1 = _mm256_add_pd(a1, _mm256_mul_pd(b, _mm256_loadu_pd(fp + 4)));
                        a2 = _mm256_add_pd(a2, _mm256_mul_pd(b, _mm256_loadu_pd(fp + 8)));
                        a3 = _mm256_add_pd(a3, _mm256_mul_pd(b, _mm256_loadu_pd(fp + 12)));
                    }
                }
                _mm256_storeu_pd(acc_out + c0, a0);
                _mm256_storeu_pd(acc_out + c0 + 4, a1);
                _mm256_storeu_pd(acc_out + c0 + 8, a2);
                _mm256_storeu_pd(acc_out + c0 + 12, a3);
            }
            for (std::size_t c = ct; c < cout; ++c) {
                double acc = 0.0;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    const double* in_row = in + ((oy * stride + ky) * w + ox * stride) * cin;
                    const double* f_row = filt + ky * kw * cin * cout;
                    for (std::size_t kc = 0; kc < kw * cin; ++kc) {
                        acc += in_row[kc] * f_row[kc * cout + c];
                    }
                }
                acc_out[c] = acc;
            }
        }
    }
}

void conv2d_grad_input_avx2(const double* up, std::size_t oh, std::size_t ow, std::size_t cout,
                            const double* filt, std::size_t kh, std::size_t kw, std::size_t cin,
                            std::size_t stride, double* gin, std::size_t h, std::size_t w) {
    for (std::size_t i = 0; i < h * w * cin; ++i) gin[i] = 0.0;
    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            const double* u = up + (oy * ow + ox) * cout;
            for (std::size_t ky = 0; ky < kh; ++ky) {
                double* g_row = gin + ((oy * stride + ky) * w + ox * stride) * cin;
                const double* f_row = filt + ky * kw * cin * cout;
                for (std::size_t kc = 0; kc < kw * cin; ++kc) {
                    g_row[kc] += dot_avx2(cout, f_row + kc * cout, u);
                }
            }
        }
    }
}

void conv2d_grad_filters_avx2(const double* in, std::size_t h, std::size_t w, std::size_t cin,
                              const double* up, std::size_t oh, std::size_t ow, std::size_t cout,
                              std::size_t kh, std::size_t kw, std::size_t stride, double* gfilt) {
    (void)h;
    for (std::size_t i = 0; i < kh * kw * cin * cout; ++i) gfilt[i] = 0.0;
    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            const double* u = up + (oy * ow + ox) * cout;
            for (std::size_t ky = 0; ky < kh; ++ky) {
                const double* in_row = in + ((oy * stride + ky) * w + ox * stride) * cin;
                double* g_row = gfilt + ky * kw * cin * cout;
                for (std::size_t kc = 0; kc < kw * cin; ++kc) {
                    axpy_avx2(cout, in_row[kc], u, g_row + kc * cout);
                }
            }
        }
    }
}

} // namespace

const KernelTable& avx2_table() {
    static const KernelTable t = {
        axpy_avx2,         dot_avx2,
        matvec_avx2,       matvec_t_avx2,
        outer_accum_avx2,  sgd_update_avx2,
        conv2d_forward_avx2, conv2d_grad_input_avx2, conv2d_grad_filters_avx2,
    };
    return t;
}

} // namespace capspoe::kernels

#endif // x86_64

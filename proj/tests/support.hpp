#pragma once

// Shared helpers for the test suites: finite differences, an independent
// plain-loop routing stepper, synthetic stroke images and an IDX writer.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "capspoe/capsules.hpp"
#include "capspoe/rng.hpp"
#include "capspoe/tensor.hpp"

namespace testsupport {

using capspoe::CapsuleActivations;
using capspoe::PredictionMaps;
using capspoe::SeededRng;
using capspoe::Tensor;

inline double rel_err(double a, double b, double floor = 1e-12) {
    double scale = std::max({std::abs(a), std::abs(b), floor});
    return std::abs(a - b) / scale;
}

/// Central finite differences of f() with respect to every entry of params.
inline Tensor finite_diff(Tensor& params, const std::function<double()>& f, double step = 1e-5) {
    Tensor g(params.shape());
    for (std::size_t k = 0; k < params.size(); ++k) {
        double saved = params[k];
        params[k] = saved + step;
        double up = f();
        params[k] = saved - step;
        double dn = f();
        params[k] = saved;
        g[k] = (up - dn) / (2.0 * step);
    }
    return g;
}

inline Tensor random_tensor(std::vector<std::size_t> shape, SeededRng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.next_gaussian();
    return t;
}

inline Tensor random_unit_tensor(std::vector<std::size_t> shape, SeededRng& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.next_uniform();
    return t;
}

// ---------------------------------------------------------------------------
// Independent routing stepper: plain nested loops, plain double sums, no
// shared code with the library implementation.

struct NaiveRouting {
    std::vector<double> c; // [I*J]
    std::vector<double> z; // forward: [J*N]; reverse: [I*M]
};

inline std::vector<double> naive_squash(const std::vector<double>& v) {
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    if (n2 == 0.0) return std::vector<double>(v.size(), 0.0);
    double n = std::sqrt(n2);
    double s = n / (1.0 + n2);
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = s * v[i];
    return out;
}

inline double naive_cos(const std::vector<double>& a, const std::vector<double>& b) {
    double na = 0.0, nb = 0.0, d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        na += a[i] * a[i];
        nb += b[i] * b[i];
        d += a[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return d / (std::sqrt(na) * std::sqrt(nb));
}

inline NaiveRouting naive_route_forward(const PredictionMaps& w, const CapsuleActivations& x,
                                        int iterations) {
    std::size_t I = w.lower().count, M = w.lower().dim;
    std::size_t J = w.upper().count, N = w.upper().dim;
    std::vector<std::vector<std::vector<double>>> zp(I);
    for (std::size_t i = 0; i < I; ++i) {
        zp[i].resize(J);
        for (std::size_t j = 0; j < J; ++j) {
            zp[i][j].assign(N, 0.0);
            const double* blk = w.block(i, j);
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t m = 0; m < M; ++m)
                    zp[i][j][n] += blk[n * M + m] * x.values[i * M + m];
        }
    }
    std::vector<double> b(I * J, 0.0);
    NaiveRouting r;
    r.c.assign(I * J, 0.0);
    r.z.assign(J * N, 0.0);
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t j = 0; j < J; ++j) {
            double den = 0.0;
            for (std::size_t i = 0; i < I; ++i) den += std::exp(b[i * J + j]);
            for (std::size_t i = 0; i < I; ++i) r.c[i * J + j] = std::exp(b[i * J + j]) / den;
        }
        for (std::size_t j = 0; j < J; ++j) {
            std::vector<double> zj(N, 0.0);
            for (std::size_t i = 0; i < I; ++i)
                for (std::size_t n = 0; n < N; ++n) zj[n] += r.c[i * J + j] * zp[i][j][n];
            for (std::size_t n = 0; n < N; ++n) r.z[j * N + n] = zj[n];
            std::vector<double> s = naive_squash(zj);
            for (std::size_t i = 0; i < I; ++i) b[i * J + j] += naive_cos(zp[i][j], s);
        }
    }
    return r;
}

inline NaiveRouting naive_route_reverse(const PredictionMaps& w, const CapsuleActivations& h,
                                        int iterations) {
    std::size_t I = w.lower().count, M = w.lower().dim;
    std::size_t J = w.upper().count, N = w.upper().dim;
    std::vector<std::vector<std::vector<double>>> zp(I);
    for (std::size_t i = 0; i < I; ++i) {
        zp[i].resize(J);
        for (std::size_t j = 0; j < J; ++j) {
            zp[i][j].assign(M, 0.0);
            const double* blk = w.block(i, j);
            for (std::size_t m = 0; m < M; ++m)
                for (std::size_t n = 0; n < N; ++n)
                    zp[i][j][m] += blk[n * M + m] * h.values[j * N + n];
        }
    }
    std::vector<double> b(I * J, 0.0);
    NaiveRouting r;
    r.c.assign(I * J, 0.0);
    r.z.assign(I * M, 0.0);
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t j = 0; j < J; ++j) {
            double den = 0.0;
            for (std::size_t i = 0; i < I; ++i) den += std::exp(b[i * J + j]);
            for (std::size_t i = 0; i < I; ++i) r.c[i * J + j] = std::exp(b[i * J + j]) / den;
        }
        for (std::size_t i = 0; i < I; ++i) {
            std::vector<double> zi(M, 0.0);
            for (std::size_t j = 0; j < J; ++j)
                for (std::size_t m = 0; m < M; ++m) zi[m] += r.c[i * J + j] * zp[i][j][m];
            for (std::size_t m = 0; m < M; ++m) r.z[i * M + m] = zi[m];
            std::vector<double> s = naive_squash(zi);
            for (std::size_t j = 0; j < J; ++j) b[i * J + j] += naive_cos(zp[i][j], s);
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Synthetic stroke images and IDX writing, for pipeline tests without a real
// dataset download.

/// n grayscale images of random thick strokes and rings, values in [0,1].
inline Tensor make_stroke_images(std::size_t n, std::size_t h, std::size_t w,
                                 std::uint64_t seed) {
    Tensor out({n, h, w});
    SeededRng rng(seed);
    for (std::size_t s = 0; s < n; ++s) {
        double* img = out.data() + s * h * w;
        int strokes = 2 + static_cast<int>(rng.next_uniform() * 2.0);
        for (int t = 0; t < strokes; ++t) {
            double x0 = w * (0.2 + 0.6 * rng.next_uniform());
            double y0 = h * (0.2 + 0.6 * rng.next_uniform());
            double ang = 2.0 * M_PI * rng.next_uniform();
            double len = 0.25 * h + 0.35 * h * rng.next_uniform();
            double x1 = x0 + len * std::cos(ang);
            double y1 = y0 + len * std::sin(ang);
            double thick = 1.0 + 1.2 * rng.next_uniform();
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    // distance from pixel to the segment
                    double px = static_cast<double>(x) - x0, py = static_cast<double>(y) - y0;
                    double dx = x1 - x0, dy = y1 - y0;
                    double tproj = (px * dx + py * dy) / (dx * dx + dy * dy);
                    tproj = std::clamp(tproj, 0.0, 1.0);
                    double ex = px - tproj * dx, ey = py - tproj * dy;
                    double d2 = ex * ex + ey * ey;
                    double v = std::exp(-d2 / (2.0 * thick * thick));
                    img[y * w + x] = std::max(img[y * w + x], v);
                }
            }
        }
    }
    return out;
}

/// Writes [N,H,W] values as an IDX unsigned-byte image stack.
inline void write_idx(const Tensor& images, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    auto be32 = [&](std::uint32_t v) {
        char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 8), static_cast<char>(v)};
        out.write(b, 4);
    };
    be32(0x00000803);
    for (std::size_t d = 0; d < 3; ++d) be32(static_cast<std::uint32_t>(images.extent(d)));
    for (std::size_t k = 0; k < images.size(); ++k) {
        double q = std::round(std::clamp(images[k], 0.0, 1.0) * 255.0);
        char byte = static_cast<char>(static_cast<unsigned char>(q));
        out.write(&byte, 1);
    }
}

/// Unique scratch directory under the build tree.
inline std::string scratch_dir(const std::string& name) {
    std::filesystem::path p = std::filesystem::temp_directory_path() / ("capspoe_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
}

} // namespace testsupport

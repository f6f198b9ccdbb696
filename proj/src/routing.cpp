#include "capspoe/routing.hpp"

#include <algorithm>
#include <cmath>

#include "capspoe/exact_sum.hpp"
#include "capspoe/kernels.hpp"

namespace capspoe {

Tensor predictions(const PredictionMaps& w, const CapsuleActivations& x) {
    if (x.layer != w.lower())
        throw ShapeError("predictions: activations do not match the lower layer spec");
    require_finite(x.values, "predictions input");
    std::size_t I = w.lower().count, M = w.lower().dim;
    std::size_t J = w.upper().count, N = w.upper().dim;
    Tensor z({I, J, N});
    const auto& k = kernels::table();
    for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t j = 0; j < J; ++j) {
            k.matvec(N, M, w.block(i, j), x.values.data() + i * M, z.data() + (i * J + j) * N);
        }
    }
    require_finite(z, "predictions output");
    return z;
}

Tensor reverse_predictions(const PredictionMaps& w, const CapsuleActivations& h) {
    if (h.layer != w.upper())
        throw ShapeError("reverse_predictions: activations do not match the upper layer spec");
    require_finite(h.values, "reverse_predictions input");
    std::size_t I = w.lower().count, M = w.lower().dim;
    std::size_t J = w.upper().count, N = w.upper().dim;
    Tensor z({I, J, M});
    const auto& k = kernels::table();
    for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t j = 0; j < J; ++j) {
            k.matvec_t(N, M, w.block(i, j), h.values.data() + j * N,
                       z.data() + (i * J + j) * M);
        }
    }
    require_finite(z, "reverse_predictions output");
    return z;
}

void squash(const double* z, std::size_t n, double* out) {
    double norm_sq = kernels::table().dot(n, z, z);
    if (norm_sq == 0.0) {
        std::fill(out, out + n, 0.0);
        return;
    }
    double norm = std::sqrt(norm_sq);
    double scale = norm / (1.0 + norm_sq); // == (n²/(1+n²)) / n
    for (std::size_t i = 0; i < n; ++i) out[i] = scale * z[i];
}

Tensor squash(const Tensor& z) {
    require_finite(z, "squash input");
    Tensor out(z.shape());
    squash(z.data(), z.size(), out.data());
    return out;
}

double cosine_agreement(const double* a, const double* b, std::size_t n) {
    const auto& k = kernels::table();
    double na = k.dot(n, a, a);
    double nb = k.dot(n, b, b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return k.dot(n, a, b) / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

// softmax over the lower index, per upper capsule. Denominator uses the
// order-invariant sum so that permuting lower capsules permutes c bitwise.
void normalize_coefficients(const Tensor& logits, Tensor& c, std::size_t I, std::size_t J,
                            ExactSum& acc) {
    for (std::size_t j = 0; j < J; ++j) {
        double mx = logits[j];
        for (std::size_t i = 1; i < I; ++i) mx = std::max(mx, logits[i * J + j]);
        acc.reset();
        for (std::size_t i = 0; i < I; ++i) {
            double e = std::exp(logits[i * J + j] - mx);
            c[i * J + j] = e;
            acc.add(e);
        }
        double den = acc.value();
        for (std::size_t i = 0; i < I; ++i) c[i * J + j] /= den;
    }
}

} // namespace

ForwardRouting route_forward(const PredictionMaps& w, const CapsuleActivations& x,
                             int iterations) {
    if (iterations < 1) throw Error("route_forward requires at least one iteration");
    std::size_t I = w.lower().count, J = w.upper().count, N = w.upper().dim;
    Tensor zp = predictions(w, x);

    ForwardRouting r;
    r.state.logits = Tensor({I, J});
    r.state.coefficients = Tensor({I, J});
    r.z = Tensor({J, N});
    std::vector<double> s(N);
    ExactSum acc;

    Tensor& b = r.state.logits;
    Tensor& c = r.state.coefficients;
    for (int it = 0; it < iterations; ++it) {
        normalize_coefficients(b, c, I, J, acc);
        for (std::size_t j = 0; j < J; ++j) {
            for (std::size_t n = 0; n < N; ++n) {
                acc.reset();
                for (std::size_t i = 0; i < I; ++i)
                    acc.add(c[i * J + j] * zp[(i * J + j) * N + n]);
                r.z[j * N + n] = acc.value();
            }
        }
        for (std::size_t j = 0; j < J; ++j) {
            squash(r.z.data() + j * N, N, s.data());
            for (std::size_t i = 0; i < I; ++i)
                b[i * J + j] += cosine_agreement(zp.data() + (i * J + j) * N, s.data(), N);
        }
    }
    r.state.iterations_run = iterations;

    r.activations.resize(J);
    for (std::size_t j = 0; j < J; ++j) {
        squash(r.z.data() + j * N, N, s.data());
        r.activations[j] = std::sqrt(kernels::table().dot(N, s.data(), s.data()));
    }
    require_finite(r.z, "route_forward output");
    return r;
}

ReverseRouting route_reverse(const PredictionMaps& w, const CapsuleActivations& h,
                             int iterations) {
    if (iterations < 1) throw Error("route_reverse requires at least one iteration");
    std::size_t I = w.lower().count, J = w.upper().count, M = w.lower().dim;
    Tensor zp = reverse_predictions(w, h);

    ReverseRouting r;
    r.state.logits = Tensor({I, J});
    r.state.coefficients = Tensor({I, J});
    r.z = Tensor({I, M});
    std::vector<double> s(M);
    ExactSum acc;

    Tensor& b = r.state.logits;
    Tensor& c = r.state.coefficients;
    for (int it = 0; it < iterations; ++it) {
        normalize_coefficients(b, c, I, J, acc);
        // collective prediction per lower capsule; the sum runs over j while
        // the normalization stays over i, which is the model's convention
        for (std::size_t i = 0; i < I; ++i) {
            for (std::size_t m = 0; m < M; ++m) {
                acc.reset();
                for (std::size_t j = 0; j < J; ++j)
                    acc.add(c[i * J + j] * zp[(i * J + j) * M + m]);
                r.z[i * M + m] = acc.value();
            }
        }
        for (std::size_t i = 0; i < I; ++i) {
            squash(r.z.data() + i * M, M, s.data());
            for (std::size_t j = 0; j < J; ++j)
                b[i * J + j] += cosine_agreement(zp.data() + (i * J + j) * M, s.data(), M);
        }
    }
    r.state.iterations_run = iterations;
    require_finite(r.z, "route_reverse output");
    return r;
}

DiagramModel routing_diagram(const RoutingState& state, const std::vector<double>& lower_acts,
                             const std::vector<double>& upper_acts, double edge_threshold) {
    std::size_t I = state.coefficients.extent(0);
    std::size_t J = state.coefficients.extent(1);
    if (lower_acts.size() != I || upper_acts.size() != J)
        throw ShapeError("routing_diagram: activation vectors do not match routing state");

    auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
    DiagramModel d;
    d.lower_shades.reserve(I);
    d.upper_shades.reserve(J);
    for (double a : lower_acts) d.lower_shades.push_back(clamp01(a));
    for (double a : upper_acts) d.upper_shades.push_back(clamp01(a));
    for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t j = 0; j < J; ++j) {
            double cij = state.coefficients[i * J + j];
            if (cij < edge_threshold) continue;
            d.edges.push_back({i, j, clamp01(cij)});
        }
    }
    return d;
}

} // namespace capspoe

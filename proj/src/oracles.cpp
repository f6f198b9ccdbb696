#include "capspoe/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "capspoe/kernels.hpp"

namespace capspoe {

void TinyModelBound::check(const EnergyModel& model) const {
    std::size_t total = model.visible().flat() + model.hidden().flat();
    if (total > max_total_neurons)
        throw Error("brute-force oracle bound exceeded: " + std::to_string(total) +
                    " neurons > " + std::to_string(max_total_neurons));
}

CapsuleActivations binary_visible(const EnergyModel& model, std::uint64_t bits) {
    std::size_t I = model.visible().count, M = model.visible().dim;
    Tensor v({I, M});
    for (std::size_t k = 0; k < I * M; ++k) v[k] = static_cast<double>((bits >> k) & 1u);
    return CapsuleActivations(model.visible(), std::move(v));
}

CapsuleActivations binary_hidden(const EnergyModel& model, std::uint64_t bits) {
    std::size_t J = model.hidden().count, N = model.hidden().dim;
    Tensor h({J, N});
    for (std::size_t k = 0; k < J * N; ++k) h[k] = static_cast<double>((bits >> k) & 1u);
    return CapsuleActivations(model.hidden(), std::move(h));
}

double brute_partition_energy_form(const EnergyModel& model, const Tensor& c,
                                   TinyModelBound bound) {
    bound.check(model);
    std::uint64_t nx = 1ull << model.visible().flat();
    std::uint64_t nh = 1ull << model.hidden().flat();
    double z = 0.0;
    for (std::uint64_t xb = 0; xb < nx; ++xb) {
        CapsuleActivations x = binary_visible(model, xb);
        for (std::uint64_t hb = 0; hb < nh; ++hb) {
            CapsuleActivations h = binary_hidden(model, hb);
            z += std::exp(-total_energy(model, x, h, c));
        }
    }
    return z;
}

namespace {

// Routed preactivation with naive loops; deliberately does not share code
// with the kernel-backed implementation so the two partition codings stay
// independent oracles of each other.
std::vector<double> naive_hidden_preactivation(const EnergyModel& model,
                                               const CapsuleActivations& x, const Tensor& c) {
    std::size_t I = model.visible().count, M = model.visible().dim;
    std::size_t J = model.hidden().count, N = model.hidden().dim;
    std::vector<double> z(J * N, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t n = 0; n < N; ++n) {
            double acc = 0.0;
            for (std::size_t i = 0; i < I; ++i) {
                const double* w = model.w.block(i, j);
                double dot = 0.0;
                for (std::size_t m = 0; m < M; ++m) dot += w[n * M + m] * x.values[i * M + m];
                acc += c[i * J + j] * dot;
            }
            z[j * N + n] = acc;
        }
    }
    return z;
}

double product_form_numerator(const EnergyModel& model, const CapsuleActivations& x,
                              const Tensor& c) {
    double p = 1.0;
    for (double z : naive_hidden_preactivation(model, x, c)) p *= 1.0 + std::exp(z);
    return p;
}

} // namespace

double brute_partition_product_form(const EnergyModel& model, const Tensor& c,
                                    TinyModelBound bound) {
    bound.check(model);
    std::uint64_t nx = 1ull << model.visible().flat();
    double z = 0.0;
    for (std::uint64_t xb = 0; xb < nx; ++xb)
        z += product_form_numerator(model, binary_visible(model, xb), c);
    return z;
}

double brute_marginal(const EnergyModel& model, const Tensor& c, const CapsuleActivations& x,
                      TinyModelBound bound) {
    bound.check(model);
    return product_form_numerator(model, x, c) / brute_partition_product_form(model, c, bound);
}

double brute_marginal_enumerated(const EnergyModel& model, const Tensor& c,
                                 const CapsuleActivations& x, TinyModelBound bound) {
    bound.check(model);
    std::uint64_t nh = 1ull << model.hidden().flat();
    double num = 0.0;
    for (std::uint64_t hb = 0; hb < nh; ++hb)
        num += std::exp(-total_energy(model, x, binary_hidden(model, hb), c));
    return num / brute_partition_energy_form(model, c, bound);
}

Tensor brute_hidden_marginals(const EnergyModel& model, const Tensor& c,
                              const CapsuleActivations& x, TinyModelBound bound) {
    bound.check(model);
    std::size_t J = model.hidden().count, N = model.hidden().dim;
    std::uint64_t nh = 1ull << (J * N);
    Tensor p({J, N});
    double norm = 0.0;
    for (std::uint64_t hb = 0; hb < nh; ++hb) {
        CapsuleActivations h = binary_hidden(model, hb);
        double w = std::exp(-total_energy(model, x, h, c));
        norm += w;
        for (std::size_t k = 0; k < J * N; ++k)
            if ((hb >> k) & 1u) p[k] += w;
    }
    for (std::size_t k = 0; k < J * N; ++k) p[k] /= norm;
    return p;
}

Tensor brute_loglik_grad(const EnergyModel& model, const Tensor& c, const CapsuleActivations& x,
                         TinyModelBound bound) {
    bound.check(model);
    std::size_t I = model.visible().count, M = model.visible().dim;
    std::size_t J = model.hidden().count, N = model.hidden().dim;
    std::uint64_t nx = 1ull << (I * M);
    std::uint64_t nh = 1ull << (J * N);

    // data term: E_{P(h|x)}[ c_ij h_j ⊗ x_i ]
    Tensor grad({I, J, N, M});
    double norm = 0.0;
    for (std::uint64_t hb = 0; hb < nh; ++hb) {
        CapsuleActivations h = binary_hidden(model, hb);
        double w = std::exp(-total_energy(model, x, h, c));
        norm += w;
        for (std::size_t i = 0; i < I; ++i)
            for (std::size_t j = 0; j < J; ++j)
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t m = 0; m < M; ++m)
                        grad[((i * J + j) * N + n) * M + m] +=
                            w * c[i * J + j] * h.values[j * N + n] * x.values[i * M + m];
    }
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] /= norm;

    // model term: E_{P(x',h)}[ c_ij h_j ⊗ x'_i ]
    Tensor mterm({I, J, N, M});
    double zsum = 0.0;
    for (std::uint64_t xb = 0; xb < nx; ++xb) {
        CapsuleActivations xp = binary_visible(model, xb);
        for (std::uint64_t hb = 0; hb < nh; ++hb) {
            CapsuleActivations h = binary_hidden(model, hb);
            double w = std::exp(-total_energy(model, xp, h, c));
            zsum += w;
            for (std::size_t i = 0; i < I; ++i)
                for (std::size_t j = 0; j < J; ++j)
                    for (std::size_t n = 0; n < N; ++n)
                        for (std::size_t m = 0; m < M; ++m)
                            mterm[((i * J + j) * N + n) * M + m] +=
                                w * c[i * J + j] * h.values[j * N + n] * xp.values[i * M + m];
        }
    }
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] -= mterm[k] / zsum;
    return grad;
}

bool VerifyReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const VerifyCheck& c) { return c.pass; });
}

namespace {

double rel_err(double a, double b) {
    double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

// Random tiny model: layer sizes within the enumeration budget, gaussian
// weights, coefficients softmax-normalized over i per j.
struct TinyInstance {
    EnergyModel model;
    Tensor c;
};

TinyInstance random_tiny(SeededRng& rng, std::size_t max_side, std::size_t neuron_budget) {
    auto draw = [&](std::size_t hi) {
        return 1 + static_cast<std::size_t>(rng.next_uniform() * static_cast<double>(hi)) % hi;
    };
    std::size_t I, M, J, N;
    do {
        I = draw(max_side);
        M = draw(max_side);
        J = draw(max_side);
        N = draw(max_side);
    } while (I * M + J * N > neuron_budget);
    EnergyModel model = EnergyModel::gaussian_init({I, M}, {J, N}, rng, 0.8);
    Tensor c({I, J});
    for (std::size_t j = 0; j < J; ++j) {
        double den = 0.0;
        for (std::size_t i = 0; i < I; ++i) {
            c[i * J + j] = std::exp(rng.next_gaussian());
            den += c[i * J + j];
        }
        for (std::size_t i = 0; i < I; ++i) c[i * J + j] /= den;
    }
    return {std::move(model), std::move(c)};
}

CapsuleActivations random_binary_visible(const EnergyModel& model, SeededRng& rng) {
    std::uint64_t bits = rng.next_u64() & ((1ull << model.visible().flat()) - 1);
    return binary_visible(model, bits);
}

VerifyCheck check_partition_duality(SeededRng& rng, int instances) {
    VerifyCheck ck{"partition energy-form vs product-form", true, 0.0, 1e-10, ""};
    for (int t = 0; t < instances; ++t) {
        TinyInstance inst = random_tiny(rng, 3, 12);
        double za = brute_partition_energy_form(inst.model, inst.c);
        double zb = brute_partition_product_form(inst.model, inst.c);
        ck.worst = std::max(ck.worst, rel_err(za, zb));
    }
    ck.pass = ck.worst <= ck.limit;
    return ck;
}

VerifyCheck check_marginals(SeededRng& rng, int instances) {
    VerifyCheck ck{"marginals: closed form vs enumeration, total mass", true, 0.0, 1e-10, ""};
    for (int t = 0; t < instances; ++t) {
        TinyInstance inst = random_tiny(rng, 2, 10);
        double mass = 0.0;
        std::uint64_t nx = 1ull << inst.model.visible().flat();
        for (std::uint64_t xb = 0; xb < nx; ++xb) {
            CapsuleActivations x = binary_visible(inst.model, xb);
            double pa = brute_marginal(inst.model, inst.c, x);
            double pb = brute_marginal_enumerated(inst.model, inst.c, x);
            ck.worst = std::max(ck.worst, rel_err(pa, pb));
            mass += pa;
        }
        ck.worst = std::max(ck.worst, std::abs(mass - 1.0));
    }
    ck.pass = ck.worst <= ck.limit;
    return ck;
}

VerifyCheck check_conditionals(SeededRng& rng, int instances) {
    VerifyCheck ck{"conditionals: closed form vs energy differences vs enumeration", true, 0.0,
                   1e-8, ""};
    for (int t = 0; t < instances; ++t) {
        TinyInstance inst = random_tiny(rng, 3, 12);
        CapsuleActivations x = random_binary_visible(inst.model, rng);
        Tensor closed = p_hidden_given_visible(inst.model, x, inst.c);
        Tensor enumerated = brute_hidden_marginals(inst.model, inst.c, x);
        std::size_t J = inst.model.hidden().count, N = inst.model.hidden().dim;
        for (std::size_t k = 0; k < J * N; ++k) {
            ck.worst = std::max(ck.worst, rel_err(closed[k], enumerated[k]));
            // sigma(E(unit off) - E(unit on)) with all other units held fixed
            CapsuleActivations h0 = binary_hidden(inst.model, 0);
            CapsuleActivations h1 = binary_hidden(inst.model, 1ull << k);
            double e0 = total_energy(inst.model, x, h0, inst.c);
            double e1 = total_energy(inst.model, x, h1, inst.c);
            double p = 1.0 / (1.0 + std::exp(-(e0 - e1)));
            ck.worst = std::max(ck.worst, rel_err(closed[k], p));
        }
    }
    ck.pass = ck.worst <= ck.limit;
    return ck;
}

VerifyCheck check_exact_gradient(SeededRng& rng, int instances, bool corrupt) {
    VerifyCheck ck{"exact log-likelihood gradient vs finite differences", true, 0.0, 1e-6, ""};
    const double step = 1e-5;
    for (int t = 0; t < instances; ++t) {
        TinyInstance inst = random_tiny(rng, 2, 9);
        CapsuleActivations x = random_binary_visible(inst.model, rng);
        Tensor grad = brute_loglik_grad(inst.model, inst.c, x);
        if (corrupt && t == 0 && grad.size() > 0) grad[0] += 0.5;
        Tensor& w = inst.model.w.weights();
        for (std::size_t k = 0; k < w.size(); ++k) {
            double saved = w[k];
            w[k] = saved + step;
            double up = std::log(brute_marginal(inst.model, inst.c, x));
            w[k] = saved - step;
            double dn = std::log(brute_marginal(inst.model, inst.c, x));
            w[k] = saved;
            double fd = (up - dn) / (2.0 * step);
            double scale = std::max({std::abs(fd), std::abs(grad[k]), 1e-4});
            ck.worst = std::max(ck.worst, std::abs(fd - grad[k]) / scale);
        }
    }
    ck.pass = ck.worst <= ck.limit;
    return ck;
}

VerifyCheck check_energy_gradient(SeededRng& rng, int instances) {
    VerifyCheck ck{"analytic energy gradient vs finite differences", true, 0.0, 1e-8, ""};
    // the energy is linear in W, so a coarse step carries no truncation
    // error and keeps cancellation noise small; norm-relative comparison
    const double step = 1e-3;
    for (int t = 0; t < instances; ++t) {
        TinyInstance inst = random_tiny(rng, 3, 14);
        CapsuleActivations x = random_binary_visible(inst.model, rng);
        std::uint64_t hb = rng.next_u64() & ((1ull << inst.model.hidden().flat()) - 1);
        CapsuleActivations h = binary_hidden(inst.model, hb);
        Tensor grad = energy_grad_w(inst.model, x, h, inst.c);
        Tensor& w = inst.model.w.weights();
        double dn2 = 0.0, nn2 = 0.0;
        for (std::size_t k = 0; k < w.size(); ++k) {
            double saved = w[k];
            w[k] = saved + step;
            double up = total_energy(inst.model, x, h, inst.c);
            w[k] = saved - step;
            double dn = total_energy(inst.model, x, h, inst.c);
            w[k] = saved;
            double fd = (up - dn) / (2.0 * step);
            dn2 += (fd - grad[k]) * (fd - grad[k]);
            nn2 += std::max(fd * fd, grad[k] * grad[k]);
        }
        if (nn2 > 0.0) ck.worst = std::max(ck.worst, std::sqrt(dn2) / std::sqrt(nn2));
    }
    ck.pass = ck.worst <= ck.limit;
    return ck;
}

VerifyCheck check_routing_invariants(SeededRng& rng, int instances) {
    VerifyCheck ck{"routing: coefficient normalization and squash range", true, 0.0, 1e-12, ""};
    for (int t = 0; t < instances; ++t) {
        std::size_t I = 2 + t % 5, M = 1 + t % 4, J = 1 + t % 3, N = 1 + (t + 1) % 4;
        SeededRng local(rng.next_u64());
        PredictionMaps w = PredictionMaps::gaussian_init({I, M}, {J, N}, local, 1.0);
        Tensor xv({I, M});
        for (std::size_t k = 0; k < xv.size(); ++k) xv[k] = local.next_gaussian();
        CapsuleActivations x({I, M}, std::move(xv));
        for (int iters = 1; iters <= 4; ++iters) {
            ForwardRouting r = route_forward(w, x, iters);
            for (std::size_t j = 0; j < J; ++j) {
                double colsum = 0.0;
                for (std::size_t i = 0; i < I; ++i) colsum += r.state.coefficients[i * J + j];
                ck.worst = std::max(ck.worst, std::abs(colsum - 1.0));
            }
            for (double a : r.activations) {
                if (a < 0.0 || a >= 1.0) ck.worst = std::max(ck.worst, 1.0);
            }
        }
    }
    ck.pass = ck.worst <= ck.limit;
    return ck;
}

VerifyCheck check_rbm_reduction(SeededRng& rng) {
    VerifyCheck ck{"I=J=1, c=1 reduces to a bias-free RBM (bit-for-bit)", true, 0.0, 0.0, ""};
    std::size_t M = 5, N = 4;
    EnergyModel model = EnergyModel::gaussian_init({1, M}, {1, N}, rng, 0.7);
    Tensor c({1, 1}, 1.0);
    Tensor xv({1, M});
    for (std::size_t m = 0; m < M; ++m) xv[m] = rng.next_uniform();
    CapsuleActivations x({1, M}, std::move(xv));

    std::uint64_t seed = rng.next_u64();
    SeededRng rng_a(seed), rng_b(seed);
    CdResult ours = cd1_step_with_c(model, x, c, rng_a);

    // hand-written bias-free RBM CD-1, naive loops
    const double* w = model.w.block(0, 0);
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    std::vector<double> hp(N), hs(N), vr(M), hr(N);
    for (std::size_t n = 0; n < N; ++n) {
        double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
        std::size_t mb = M & ~std::size_t(3);
        for (std::size_t m = 0; m < mb; m += 4) {
            a0 += w[n * M + m] * x.values[m];
            a1 += w[n * M + m + 1] * x.values[m + 1];
            a2 += w[n * M + m + 2] * x.values[m + 2];
            a3 += w[n * M + m + 3] * x.values[m + 3];
        }
        double acc = (a0 + a1) + (a2 + a3);
        for (std::size_t m = mb; m < M; ++m) acc += w[n * M + m] * x.values[m];
        hp[n] = sig(1.0 * acc);
        hs[n] = rng_b.next_bernoulli(hp[n]) ? 1.0 : 0.0;
    }
    for (std::size_t m = 0; m < M; ++m) {
        double acc = 0.0;
        for (std::size_t n = 0; n < N; ++n) acc += hs[n] * w[n * M + m];
        vr[m] = sig(1.0 * acc);
    }
    for (std::size_t n = 0; n < N; ++n) {
        double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
        std::size_t mb = M & ~std::size_t(3);
        for (std::size_t m = 0; m < mb; m += 4) {
            a0 += w[n * M + m] * vr[m];
            a1 += w[n * M + m + 1] * vr[m + 1];
            a2 += w[n * M + m + 2] * vr[m + 2];
            a3 += w[n * M + m + 3] * vr[m + 3];
        }
        double acc = (a0 + a1) + (a2 + a3);
        for (std::size_t m = mb; m < M; ++m) acc += w[n * M + m] * vr[m];
        hr[n] = sig(1.0 * acc);
    }
    for (std::size_t n = 0; n < N && ck.pass; ++n) {
        for (std::size_t m = 0; m < M; ++m) {
            double expect = hp[n] * x.values[m] - hr[n] * vr[m];
            if (ours.grad[n * M + m] != expect) {
                ck.pass = false;
                ck.worst = std::abs(ours.grad[n * M + m] - expect);
                break;
            }
        }
    }
    return ck;
}

VerifyCheck check_cd_direction(SeededRng& rng, int instances, int chains) {
    VerifyCheck ck{"CD-1 mean gradient aligns with the exact gradient", true, 1.0, 0.5, ""};
    double worst_cos = 1.0;
    for (int t = 0; t < instances; ++t) {
        TinyInstance inst = random_tiny(rng, 2, 8);
        CapsuleActivations x = random_binary_visible(inst.model, rng);
        Tensor exact = brute_loglik_grad(inst.model, inst.c, x);
        Tensor mean(exact.shape());
        for (int ch = 0; ch < chains; ++ch) {
            SeededRng chain_rng(rng.next_u64());
            CdResult r = cd1_step_with_c(inst.model, x, inst.c, chain_rng);
            for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += r.grad[k];
        }
        const auto& kt = kernels::table();
        double nm = std::sqrt(kt.dot(mean.size(), mean.data(), mean.data()));
        double ne = std::sqrt(kt.dot(exact.size(), exact.data(), exact.data()));
        double cosv = nm > 0 && ne > 0
                          ? kt.dot(mean.size(), mean.data(), exact.data()) / (nm * ne)
                          : 0.0;
        worst_cos = std::min(worst_cos, cosv);
    }
    ck.worst = worst_cos;
    ck.pass = worst_cos > ck.limit;
    ck.detail = "worst cosine similarity";
    return ck;
}

VerifyCheck check_kernel_equivalence(SeededRng& rng) {
    VerifyCheck ck{"kernel backends agree bitwise", true, 0.0, 0.0, ""};
    if (!kernels::backend_available(kernels::Backend::Avx2)) {
        ck.detail = "avx2 unavailable, scalar only";
        return ck;
    }
    const auto& a = kernels::table_for(kernels::Backend::Scalar);
    const auto& b = kernels::table_for(kernels::Backend::Avx2);
    for (int t = 0; t < 32; ++t) {
        std::size_t n = 1 + static_cast<std::size_t>(rng.next_uniform() * 70.0);
        std::vector<double> x(n), y(n), ya(n), yb(n);
        for (std::size_t k = 0; k < n; ++k) {
            x[k] = rng.next_gaussian();
            y[k] = rng.next_gaussian();
            ya[k] = yb[k] = y[k];
        }
        if (a.dot(n, x.data(), y.data()) != b.dot(n, x.data(), y.data())) ck.pass = false;
        a.axpy(n, 1.7, x.data(), ya.data());
        b.axpy(n, 1.7, x.data(), yb.data());
        if (ya != yb) ck.pass = false;
    }
    return ck;
}

} // namespace

VerifyReport run_verify(std::uint64_t seed) {
    bool corrupt = std::getenv("CAPSPOE_VERIFY_CORRUPT") != nullptr;
    VerifyReport rep;
    rep.seed = seed;
    SeededRng rng(seed);
    rep.checks.push_back(check_partition_duality(rng, 20));
    rep.checks.push_back(check_marginals(rng, 10));
    rep.checks.push_back(check_conditionals(rng, 20));
    rep.checks.push_back(check_exact_gradient(rng, 6, corrupt));
    rep.checks.push_back(check_energy_gradient(rng, 10));
    rep.checks.push_back(check_routing_invariants(rng, 12));
    rep.checks.push_back(check_rbm_reduction(rng));
    rep.checks.push_back(check_cd_direction(rng, 4, 2000));
    rep.checks.push_back(check_kernel_equivalence(rng));
    return rep;
}

} // namespace capspoe

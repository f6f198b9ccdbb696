#include "capspoe/energy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "capspoe/kernels.hpp"
#include "capspoe/ops.hpp"
#include "capspoe/parallel.hpp"

namespace capspoe {

EnergyModel EnergyModel::gaussian_init(CapsuleLayerSpec visible, CapsuleLayerSpec hidden,
                                       SeededRng& rng, double stddev) {
    return EnergyModel(PredictionMaps::gaussian_init(visible, hidden, rng, stddev));
}

double pair_energy(const double* x_i, std::size_t m, const double* h_j, std::size_t n,
                   const double* w_block) {
    const auto& k = kernels::table();
    double e = 0.0;
    for (std::size_t r = 0; r < n; ++r) e += h_j[r] * k.dot(m, w_block + r * m, x_i);
    return -e;
}

double pair_energy(const Tensor& x_i, const Tensor& h_j, const Tensor& w_ij) {
    std::size_t m = x_i.size(), n = h_j.size();
    if (w_ij.rank() != 2 || w_ij.extent(0) != n || w_ij.extent(1) != m)
        throw ShapeError("pair_energy: W must be [dim(h), dim(x)]");
    return pair_energy(x_i.data(), m, h_j.data(), n, w_ij.data());
}

namespace {

void check_coefficients(const EnergyModel& model, const Tensor& c) {
    if (c.rank() != 2 || c.extent(0) != model.visible().count ||
        c.extent(1) != model.hidden().count)
        throw ShapeError("routing coefficients must be [I,J]");
}

void check_visible(const EnergyModel& model, const CapsuleActivations& x) {
    if (x.layer != model.visible())
        throw ShapeError("activations do not match the visible layer spec");
}

void check_hidden(const EnergyModel& model, const CapsuleActivations& h) {
    if (h.layer != model.hidden())
        throw ShapeError("activations do not match the hidden layer spec");
}

} // namespace

double total_energy(const EnergyModel& model, const CapsuleActivations& x,
                    const CapsuleActivations& h, const Tensor& c) {
    check_visible(model, x);
    check_hidden(model, h);
    check_coefficients(model, c);
    std::size_t I = model.visible().count, M = model.visible().dim;
    std::size_t J = model.hidden().count, N = model.hidden().dim;
    double e = 0.0;
    for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t j = 0; j < J; ++j) {
            double cij = c[i * J + j];
            if (cij == 0.0) continue;
            e += cij * pair_energy(x.values.data() + i * M, M, h.values.data() + j * N, N,
                                   model.w.block(i, j));
        }
    }
    return e;
}

Tensor routed_hidden_preactivation(const EnergyModel& model, const CapsuleActivations& x,
                                   const Tensor& c) {
    check_visible(model, x);
    check_coefficients(model, c);
    std::size_t I = model.visible().count, M = model.visible().dim;
    std::size_t J = model.hidden().count, N = model.hidden().dim;
    Tensor z({J, N});
    const auto& k = kernels::table();
    std::vector<double> tmp(N);
    for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t j = 0; j < J; ++j) {
            double cij = c[i * J + j];
            if (cij == 0.0) continue;
            k.matvec(N, M, model.w.block(i, j), x.values.data() + i * M, tmp.data());
            k.axpy(N, cij, tmp.data(), z.data() + j * N);
        }
    }
    require_finite(z, "routed hidden preactivation");
    return z;
}

Tensor routed_visible_preactivation(const EnergyModel& model, const CapsuleActivations& h,
                                    const Tensor& c) {
    check_hidden(model, h);
    check_coefficients(model, c);
    std::size_t I = model.visible().count, M = model.visible().dim;
    std::size_t J = model.hidden().count, N = model.hidden().dim;
    Tensor z({I, M});
    const auto& k = kernels::table();
    std::vector<double> tmp(M);
    for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t j = 0; j < J; ++j) {
            double cij = c[i * J + j];
            if (cij == 0.0) continue;
            k.matvec_t(N, M, model.w.block(i, j), h.values.data() + j * N, tmp.data());
            k.axpy(M, cij, tmp.data(), z.data() + i * M);
        }
    }
    require_finite(z, "routed visible preactivation");
    return z;
}

Tensor p_hidden_given_visible(const EnergyModel& model, const CapsuleActivations& x,
                              const Tensor& c) {
    return sigmoid(routed_hidden_preactivation(model, x, c));
}

Tensor p_visible_given_hidden(const EnergyModel& model, const CapsuleActivations& h,
                              const Tensor& c) {
    return sigmoid(routed_visible_preactivation(model, h, c));
}

Tensor sample_bernoulli(const Tensor& probs, SeededRng& rng) {
    Tensor out(probs.shape());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        double p = probs[i];
        if (!(p >= 0.0 && p <= 1.0)) throw Error("sample_bernoulli probability outside [0,1]");
        out[i] = rng.next_bernoulli(p) ? 1.0 : 0.0;
    }
    return out;
}

Tensor energy_grad_w(const EnergyModel& model, const CapsuleActivations& x,
                     const CapsuleActivations& h, const Tensor& c) {
    check_visible(model, x);
    check_hidden(model, h);
    check_coefficients(model, c);
    std::size_t I = model.visible().count, M = model.visible().dim;
    std::size_t J = model.hidden().count, N = model.hidden().dim;
    Tensor g({I, J, N, M});
    const auto& k = kernels::table();
    for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t j = 0; j < J; ++j) {
            k.outer_accum(N, M, -c[i * J + j], h.values.data() + j * N,
                          x.values.data() + i * M, g.data() + (i * J + j) * N * M);
        }
    }
    return g;
}

Tensor cd_gradient_from_phases(const Tensor& c, const CapsuleActivations& x_data,
                               const Tensor& h_data, const CapsuleActivations& x_model,
                               const Tensor& h_model) {
    std::size_t I = x_data.layer.count, M = x_data.layer.dim;
    std::size_t J = h_data.extent(0), N = h_data.extent(1);
    if (c.rank() != 2 || c.extent(0) != I || c.extent(1) != J)
        throw ShapeError("cd gradient: coefficients must be [I,J]");
    require_same_shape(h_data, h_model, "cd gradient hidden phases");
    require_same_shape(x_data.values, x_model.values, "cd gradient visible phases");
    Tensor g({I, J, N, M});
    const auto& k = kernels::table();
    for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t j = 0; j < J; ++j) {
            double cij = c[i * J + j];
            double* blk = g.data() + (i * J + j) * N * M;
            k.outer_accum(N, M, cij, h_data.data() + j * N, x_data.values.data() + i * M, blk);
            k.outer_accum(N, M, -cij, h_model.data() + j * N, x_model.values.data() + i * M,
                          blk);
        }
    }
    return g;
}

CdResult cd1_step_with_c(const EnergyModel& model, const CapsuleActivations& x_data,
                         const Tensor& c, SeededRng& rng) {
    check_visible(model, x_data);
    check_coefficients(model, c);
    for (std::size_t i = 0; i < x_data.values.size(); ++i) {
        double v = x_data.values[i];
        if (!(v >= 0.0 && v <= 1.0)) throw Error("cd1_step visible data outside [0,1]");
    }
    std::size_t I = model.visible().count, M = model.visible().dim;
    std::size_t J = model.hidden().count, N = model.hidden().dim;

    Tensor h_probs = p_hidden_given_visible(model, x_data, c);
    Tensor h_sample = sample_bernoulli(h_probs, rng);
    CapsuleActivations h_act(model.hidden(), h_sample.reshaped({J, N}));
    Tensor x_recon = p_visible_given_hidden(model, h_act, c);
    CapsuleActivations x_recon_act(model.visible(), x_recon.reshaped({I, M}));
    Tensor h_recon = p_hidden_given_visible(model, x_recon_act, c);

    CdResult r;
    r.grad = cd_gradient_from_phases(c, x_data, h_probs, x_recon_act, h_recon);
    require_finite(r.grad, "cd1 gradient");

    r.data_stats = Tensor({I, J});
    r.model_stats = Tensor({I, J});
    const auto& k = kernels::table();
    for (std::size_t i = 0; i < I; ++i) {
        for (std::size_t j = 0; j < J; ++j) {
            double cij = c[i * J + j];
            double hd = k.dot(N, h_probs.data() + j * N, h_probs.data() + j * N);
            double xd = k.dot(M, x_data.values.data() + i * M, x_data.values.data() + i * M);
            double hm = k.dot(N, h_recon.data() + j * N, h_recon.data() + j * N);
            double xm = k.dot(M, x_recon.data() + i * M, x_recon.data() + i * M);
            r.data_stats[i * J + j] = std::abs(cij) * std::sqrt(hd * xd);
            r.model_stats[i * J + j] = std::abs(cij) * std::sqrt(hm * xm);
        }
    }

    // mean cross-entropy between the data and its one-step reconstruction
    double xent = 0.0;
    for (std::size_t i = 0; i < I * M; ++i) {
        double t = x_data.values[i];
        double p = x_recon[i]; // strictly inside (0,1): sigmoid output
        xent -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    }
    r.reconstruction_xent = xent / static_cast<double>(I * M);
    return r;
}

CdResult cd1_step(const EnergyModel& model, const CapsuleActivations& x_data,
                  int routing_iterations, SeededRng& rng) {
    ForwardRouting routed = route_forward(model.w, x_data, routing_iterations);
    return cd1_step_with_c(model, x_data, routed.state.coefficients, rng);
}

namespace {

// Seeded Fisher-Yates; one uniform per swap.
void shuffle_indices(std::vector<std::size_t>& idx, SeededRng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_uniform() * static_cast<double>(i));
        if (j >= i) j = i - 1;
        std::swap(idx[i - 1], idx[j]);
    }
}

constexpr std::uint64_t kShuffleTag = 0x7368756666ULL; // stream id for epoch shuffles

} // namespace

std::vector<EpochStats> train_capsule_layer(EnergyModel& model, const Tensor& dataset,
                                            const CapsuleTrainOptions& opts,
                                            SgdMomentumState& optimizer, std::ostream* metrics) {
    if (dataset.rank() != 3 || dataset.extent(1) != model.visible().count ||
        dataset.extent(2) != model.visible().dim)
        throw ShapeError("capsule training dataset must be [S,I,M] matching the model");
    if (opts.batch == 0) throw Error("batch size must be positive");
    std::size_t S = dataset.extent(0);
    std::size_t I = model.visible().count, M = model.visible().dim;
    std::size_t threads = resolve_thread_count(opts.threads);

    std::vector<EpochStats> stats;
    std::vector<std::size_t> order(S);
    std::iota(order.begin(), order.end(), 0);

    std::vector<CdResult> slots(threads);
    Tensor grad_acc(model.w.weights().shape());
    const auto& k = kernels::table();

    std::size_t steps_per_epoch = (S + opts.batch - 1) / opts.batch;
    for (std::size_t epoch = opts.start_epoch; epoch < opts.epochs; ++epoch) {
        std::size_t step = epoch * steps_per_epoch;
        SeededRng shuffle_rng(SeededRng::stream_seed(opts.seed, kShuffleTag, epoch));
        std::iota(order.begin(), order.end(), 0);
        shuffle_indices(order, shuffle_rng);

        double epoch_xent = 0.0;
        EpochStats es;
        es.epoch = epoch;
        for (std::size_t start = 0; start < S; start += opts.batch) {
            std::size_t count = std::min(opts.batch, S - start);
            std::fill(grad_acc.data(), grad_acc.data() + grad_acc.size(), 0.0);
            double batch_xent = 0.0;

            // per-sample CD steps in deterministic rounds; gradients
            // accumulate in sample order, so thread count cannot change
            // the result
            deterministic_rounds(
                count, threads,
                [&](std::size_t item, std::size_t slot) {
                    std::size_t sample = order[start + item];
                    SeededRng rng(SeededRng::stream_seed(opts.seed, epoch, sample));
                    CapsuleActivations x(
                        model.visible(),
                        Tensor({I, M},
                               std::vector<double>(dataset.data() + sample * I * M,
                                                   dataset.data() + (sample + 1) * I * M)));
                    slots[slot] = cd1_step(model, x, opts.routing_iterations, rng);
                },
                [&](std::size_t, std::size_t slot) {
                    k.axpy(grad_acc.size(), 1.0, slots[slot].grad.data(), grad_acc.data());
                    batch_xent += slots[slot].reconstruction_xent;
                });

            double inv = 1.0 / static_cast<double>(count);
            Tensor grad_mean(grad_acc.shape());
            // descend on the negated ascent direction
            k.axpy(grad_acc.size(), -inv, grad_acc.data(), grad_mean.data());
            double gnorm = std::sqrt(k.dot(grad_mean.size(), grad_mean.data(), grad_mean.data()));
            double lr_used = optimizer.learning_rate;
            sgd_step(model.w.weights(), grad_mean, optimizer);

            epoch_xent += batch_xent;
            es.last_grad_norm = gnorm;
            es.last_lr = lr_used;
            ++step;
            if (metrics) {
                char line[160];
                std::snprintf(line, sizeof line,
                              "epoch=%zu step=%zu xent=%.12g grad_norm=%.12g lr=%.12g\n", epoch,
                              step, batch_xent * inv, gnorm, lr_used);
                *metrics << line;
            }
        }
        es.mean_xent = epoch_xent / static_cast<double>(S);
        if (metrics) {
            char line[120];
            std::snprintf(line, sizeof line, "epoch=%zu mean_xent=%.12g\n", epoch, es.mean_xent);
            *metrics << line;
        }
        stats.push_back(es);
    }
    return stats;
}

Tensor generate(const EnergyModel& model, std::size_t capsule_index, int routing_iterations,
                SeededRng& rng, const VisibleDecoder& decoder) {
    std::size_t J = model.hidden().count, N = model.hidden().dim;
    if (capsule_index >= J) throw Error("generate: capsule index out of range");
    Tensor h({J, N});
    for (std::size_t n = 0; n < N; ++n)
        h[capsule_index * N + n] = 1.0 / (1.0 + std::exp(-rng.next_gaussian()));
    CapsuleActivations h_act(model.hidden(), std::move(h));
    ReverseRouting routed = route_reverse(model.w, h_act, routing_iterations);
    Tensor x_probs = sigmoid(routed.z);
    return decoder(x_probs);
}

} // namespace capspoe

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "capspoe/capsules.hpp"
#include "capspoe/optimizer.hpp"
#include "capspoe/routing.hpp"

namespace capspoe {

/// Routing-weighted bilinear energy model between a visible capsule layer
/// (I capsules of dim M) and a hidden one (J capsules of dim N):
///
///   E(x, h) = -sum_ij c_ij · h_jᵀ · W_ij · x_i
///
/// There are no bias parameters. With the coefficients fixed, the joint
/// density exp(-E)/Z factorizes over hidden neurons as a product of expert
/// neurons, which gives logistic conditionals in both directions.
struct EnergyModel {
    PredictionMaps w;

    EnergyModel(CapsuleLayerSpec visible, CapsuleLayerSpec hidden) : w(visible, hidden) {}
    explicit EnergyModel(PredictionMaps maps) : w(std::move(maps)) {}

    const CapsuleLayerSpec& visible() const { return w.lower(); }
    const CapsuleLayerSpec& hidden() const { return w.upper(); }

    static EnergyModel gaussian_init(CapsuleLayerSpec visible, CapsuleLayerSpec hidden,
                                     SeededRng& rng, double stddev);
};

/// -h_jᵀ · W_ij · x_i for one capsule pair; w_block is row-major N x M.
double pair_energy(const double* x_i, std::size_t m, const double* h_j, std::size_t n,
                   const double* w_block);
double pair_energy(const Tensor& x_i, const Tensor& h_j, const Tensor& w_ij);

/// sum_ij c_ij · pair_energy(x_i, h_j, W_ij). c is [I,J].
double total_energy(const EnergyModel& model, const CapsuleActivations& x,
                    const CapsuleActivations& h, const Tensor& c);

/// z_j = sum_i c_ij W_ij x_i, shape [J,N].
Tensor routed_hidden_preactivation(const EnergyModel& model, const CapsuleActivations& x,
                                   const Tensor& c);
/// z_i = sum_j c_ij W_ijᵀ h_j, shape [I,M].
Tensor routed_visible_preactivation(const EnergyModel& model, const CapsuleActivations& h,
                                    const Tensor& c);

/// P(h_{j,n}=1 | x) = σ(z_{j,n}); shape [J,N].
Tensor p_hidden_given_visible(const EnergyModel& model, const CapsuleActivations& x,
                              const Tensor& c);
/// P(x_{i,m}=1 | h) = σ((sum_j c_ij W_ijᵀ h_j)_m); shape [I,M]. Uses the
/// same coefficients as the forward direction.
Tensor p_visible_given_hidden(const EnergyModel& model, const CapsuleActivations& h,
                              const Tensor& c);

/// Independent Bernoulli draws, one uniform per entry in row-major order.
Tensor sample_bernoulli(const Tensor& probs, SeededRng& rng);

/// ∂E/∂W as [I,J,N,M]; block (i,j) is -c_ij · (h_j ⊗ x_i).
Tensor energy_grad_w(const EnergyModel& model, const CapsuleActivations& x,
                     const CapsuleActivations& h, const Tensor& c);

struct CdResult {
    Tensor grad;        // [I,J,N,M] log-likelihood ascent direction
    Tensor data_stats;  // [I,J] Frobenius norms of the data-phase terms
    Tensor model_stats; // [I,J] same for the model phase
    double reconstruction_xent = 0.0; // mean per visible neuron
};

/// The gradient assembly of the CD-1 rule given fixed phase statistics:
/// grad[i][j] = c_ij (h_data_j ⊗ x_data_i - h_model_j ⊗ x_model_i).
/// Exposed separately so linearity in c is testable with phases held fixed.
Tensor cd_gradient_from_phases(const Tensor& c, const CapsuleActivations& x_data,
                               const Tensor& h_data, const CapsuleActivations& x_model,
                               const Tensor& h_model);

/// One contrastive-divergence step with the coefficients supplied directly.
/// Positive phase samples hidden binaries; reconstruction and negative phase
/// use probabilities. Consumes exactly J·N uniforms from rng.
CdResult cd1_step_with_c(const EnergyModel& model, const CapsuleActivations& x_data,
                         const Tensor& c, SeededRng& rng);

/// Full two-step update: routing on the data fixes c, then CD-1 with that c.
CdResult cd1_step(const EnergyModel& model, const CapsuleActivations& x_data,
                  int routing_iterations, SeededRng& rng);

struct CapsuleTrainOptions {
    std::size_t epochs = 3;      // total target epoch count
    std::size_t start_epoch = 0; // nonzero when resuming from a checkpoint
    std::size_t batch = 64;
    int routing_iterations = 3;
    int threads = 0; // 0 = hardware concurrency
    std::uint64_t seed = 1;
};

struct EpochStats {
    std::size_t epoch = 0;
    double mean_xent = 0.0;
    double last_grad_norm = 0.0;
    double last_lr = 0.0;
};

/// Trains the prediction maps by repeated CD-1 over minibatches. dataset is
/// [S,I,M] with values in [0,1]. Per-sample work is deterministic: every
/// (epoch, sample) pair owns a derived RNG stream and gradients accumulate in
/// sample order, so results do not depend on thread count. Metrics lines
/// (epoch, step, xent, grad_norm, lr) go to `metrics` when non-null.
std::vector<EpochStats> train_capsule_layer(EnergyModel& model, const Tensor& dataset,
                                            const CapsuleTrainOptions& opts,
                                            SgdMomentumState& optimizer, std::ostream* metrics);

using VisibleDecoder = std::function<Tensor(const Tensor& visible_probs)>;

/// Generation pass: all hidden capsules zero except `capsule_index`, which
/// receives a sigmoided standard-normal N-vector; reverse routing fixes the
/// coefficients and the visible probabilities σ(z_i) feed the decoder.
Tensor generate(const EnergyModel& model, std::size_t capsule_index, int routing_iterations,
                SeededRng& rng, const VisibleDecoder& decoder);

} // namespace capspoe

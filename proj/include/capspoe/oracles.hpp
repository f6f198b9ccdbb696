#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "capspoe/energy.hpp"

namespace capspoe {

/// Enumeration guard: brute-force oracles refuse models with more than this
/// many total neurons (2^20 configurations at the cap).
struct TinyModelBound {
    std::size_t max_total_neurons = 20;

    void check(const EnergyModel& model) const;
};

/// Binary visible configuration from the low bits of `bits`: neuron i*M+m is
/// (bits >> (i*M+m)) & 1.
CapsuleActivations binary_visible(const EnergyModel& model, std::uint64_t bits);
CapsuleActivations binary_hidden(const EnergyModel& model, std::uint64_t bits);

/// Z as a sum of exp(-E) over every binary (x,h) configuration.
double brute_partition_energy_form(const EnergyModel& model, const Tensor& c,
                                   TinyModelBound bound = {});

/// Z from the product-of-experts factorization: sum over x of
/// prod_{j,n} (1 + exp(sum_i c_ij (W_ij x_i)_n)). Plain-loop arithmetic,
/// independent of the energy-form coding.
double brute_partition_product_form(const EnergyModel& model, const Tensor& c,
                                    TinyModelBound bound = {});

/// P(x) by the closed product form over the product-form Z.
double brute_marginal(const EnergyModel& model, const Tensor& c, const CapsuleActivations& x,
                      TinyModelBound bound = {});

/// P(x) as sum_h exp(-E(x,h)) over the energy-form Z.
double brute_marginal_enumerated(const EnergyModel& model, const Tensor& c,
                                 const CapsuleActivations& x, TinyModelBound bound = {});

/// Exact per-neuron P(h_{j,n}=1 | x) by enumerating the conditional.
Tensor brute_hidden_marginals(const EnergyModel& model, const Tensor& c,
                              const CapsuleActivations& x, TinyModelBound bound = {});

/// Exact gradient of log P(x) w.r.t. every W_ij, [I,J,N,M]: the data term
/// enumerates P(h|x), the model term enumerates the full joint.
Tensor brute_loglik_grad(const EnergyModel& model, const Tensor& c,
                         const CapsuleActivations& x, TinyModelBound bound = {});

struct VerifyCheck {
    std::string name;
    bool pass = false;
    double worst = 0.0;  // worst observed error or discrepancy
    double limit = 0.0;  // threshold it was held against
    std::string detail;
};

struct VerifyReport {
    std::uint64_t seed = 0;
    std::vector<VerifyCheck> checks;
    bool all_pass() const;
};

/// Self-check suite over seeded random tiny instances. Exercised by the
/// `verify` CLI subcommand and by tests. Setting CAPSPOE_VERIFY_CORRUPT=1
/// injects a gradient corruption so the failure path is testable.
VerifyReport run_verify(std::uint64_t seed);

} // namespace capspoe

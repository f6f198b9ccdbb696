#pragma once

#include "capspoe/tensor.hpp"

namespace capspoe {

/// Hyperparameters for SGD with momentum, per-step learning-rate decay and
/// l2 weight penalty.
struct SgdHyper {
    double learning_rate = 0.01;
    double momentum = 0.9;
    double decay = 0.999; // multiplicative, applied once per step
    double l2 = 1e-4;
};

/// Per-parameter-tensor optimizer state.
///
/// step semantics: v <- momentum*v - lr*(grad + l2*params);
///                 params <- params + v;  lr <- lr*decay.
struct SgdMomentumState {
    Tensor velocity; // mirrors the parameter shape
    double learning_rate = 0.01;
    double momentum = 0.0;
    double decay = 1.0;
    double l2 = 0.0;

    SgdMomentumState() = default;
    SgdMomentumState(const Tensor& params_like, const SgdHyper& h);
};

void sgd_step(Tensor& params, const Tensor& grad, SgdMomentumState& state);

} // namespace capspoe

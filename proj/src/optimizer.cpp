#include "capspoe/optimizer.hpp"

#include "capspoe/kernels.hpp"

namespace capspoe {

SgdMomentumState::SgdMomentumState(const Tensor& params_like, const SgdHyper& h)
    : velocity(params_like.shape()),
      learning_rate(h.learning_rate),
      momentum(h.momentum),
      decay(h.decay),
      l2(h.l2) {
    if (!(learning_rate >= 0.0)) throw Error("sgd learning rate must be nonnegative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("sgd momentum must be in [0,1)");
    if (!(decay > 0.0 && decay <= 1.0)) throw Error("sgd decay must be in (0,1]");
    if (!(l2 >= 0.0)) throw Error("sgd l2 must be nonnegative");
}

void sgd_step(Tensor& params, const Tensor& grad, SgdMomentumState& state) {
    require_same_shape(params, grad, "sgd_step params/grad");
    require_same_shape(params, state.velocity, "sgd_step params/velocity");
    require_finite(grad, "sgd_step grad");
    kernels::table().sgd_update(params.size(), params.data(), state.velocity.data(), grad.data(),
                                state.learning_rate, state.momentum, state.l2);
    require_finite(params, "sgd_step update");
    state.learning_rate *= state.decay;
}

} // namespace capspoe

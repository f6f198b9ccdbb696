#pragma once

#include <cstddef>

#include "capspoe/rng.hpp"
#include "capspoe/tensor.hpp"

namespace capspoe {

/// One capsule layer: `count` capsules of `dim` neurons each.
struct CapsuleLayerSpec {
    std::size_t count = 0;
    std::size_t dim = 0;

    std::size_t flat() const { return count * dim; }
    bool operator==(const CapsuleLayerSpec&) const = default;
};

/// The full set of prediction matrices between a lower layer (I capsules of
/// dim M) and an upper layer (J capsules of dim N), stored as one flat
/// [I,J,N,M] tensor. block(i,j) is the row-major N x M matrix mapping
/// capsule i's vector to its prediction of capsule j. Reverse inference uses
/// the transpose of block(i,j); there is no separate j-to-i matrix.
class PredictionMaps {
public:
    PredictionMaps(CapsuleLayerSpec lower, CapsuleLayerSpec upper);

    static PredictionMaps gaussian_init(CapsuleLayerSpec lower, CapsuleLayerSpec upper,
                                        SeededRng& rng, double stddev);

    const CapsuleLayerSpec& lower() const { return lower_; }
    const CapsuleLayerSpec& upper() const { return upper_; }

    double* block(std::size_t i, std::size_t j) {
        return w_.data() + (i * upper_.count + j) * upper_.dim * lower_.dim;
    }
    const double* block(std::size_t i, std::size_t j) const {
        return w_.data() + (i * upper_.count + j) * upper_.dim * lower_.dim;
    }

    Tensor& weights() { return w_; }
    const Tensor& weights() const { return w_; }

private:
    CapsuleLayerSpec lower_, upper_;
    Tensor w_; // [I, J, N, M]
};

/// A layer's capsule vectors, [count, dim]; the flat view is the layer's
/// count*dim neuron vector.
struct CapsuleActivations {
    CapsuleLayerSpec layer;
    Tensor values; // [count, dim]

    CapsuleActivations() = default;
    CapsuleActivations(CapsuleLayerSpec spec, Tensor vals);

    double* capsule(std::size_t i) { return values.data() + i * layer.dim; }
    const double* capsule(std::size_t i) const { return values.data() + i * layer.dim; }
};

} // namespace capspoe

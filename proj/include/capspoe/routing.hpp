#pragma once

#include <cstddef>
#include <vector>

#include "capspoe/capsules.hpp"
#include "capspoe/tensor.hpp"

namespace capspoe {

/// Routing logits and coefficients between two capsule layers. The
/// coefficients are a softmax of the logits over the lower layer, so
/// sum_i c[i][j] == 1 for every upper capsule j.
struct RoutingState {
    Tensor logits;       // [I, J]
    Tensor coefficients; // [I, J]
    int iterations_run = 0;
};

/// All pairwise predictions z[i][j] = W_ij · x_i, shape [I, J, N].
Tensor predictions(const PredictionMaps& w, const CapsuleActivations& x);

/// Reverse predictions z[i][j] = W_ijᵀ · h_j, shape [I, J, M].
Tensor reverse_predictions(const PredictionMaps& w, const CapsuleActivations& h);

/// squash(z) = (|z|²/(1+|z|²)) · z/|z|; the zero vector maps to itself.
/// Direction is preserved and the output magnitude lies in [0,1).
void squash(const double* z, std::size_t n, double* out);
Tensor squash(const Tensor& z);

/// Cosine of the angle between two vectors; 0 if either is the zero vector.
double cosine_agreement(const double* a, const double* b, std::size_t n);

struct ForwardRouting {
    RoutingState state;
    Tensor z;                        // [J, N] routed pre-activations
    std::vector<double> activations; // |squash(z_j)| per upper capsule
};

/// Routing by agreement, data direction. Starts from zero logits; each round
/// renormalizes coefficients, forms the weighted prediction z_j, and rewards
/// predictions that agree (cosine) with squash(z_j). Cross-capsule
/// reductions use order-invariant exact summation, so permuting capsules
/// permutes the result bitwise.
ForwardRouting route_forward(const PredictionMaps& w, const CapsuleActivations& x,
                             int iterations);

struct ReverseRouting {
    RoutingState state;
    Tensor z; // [I, M]
};

/// Mirror of route_forward for generation: predictions run through the
/// transposed maps, the collective vector is formed per lower capsule
/// (z_i = sum_j c_ij z_{i|j}), and the coefficients keep the forward
/// normalization sum_i c_ij = 1.
ReverseRouting route_reverse(const PredictionMaps& w, const CapsuleActivations& h,
                             int iterations);

/// Grayscale rendering model for a routing state: node shades follow
/// activation magnitude, edge shades follow c_ij, both on [0,1] where 1 is
/// darkest. Edges below the threshold are omitted.
struct DiagramModel {
    std::vector<double> lower_shades;
    std::vector<double> upper_shades;
    struct Edge {
        std::size_t i, j;
        double shade;
    };
    std::vector<Edge> edges;
};

DiagramModel routing_diagram(const RoutingState& state, const std::vector<double>& lower_acts,
                             const std::vector<double>& upper_acts, double edge_threshold = 0.01);

} // namespace capspoe

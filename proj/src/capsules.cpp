#include "capspoe/capsules.hpp"

namespace capspoe {

PredictionMaps::PredictionMaps(CapsuleLayerSpec lower, CapsuleLayerSpec upper)
    : lower_(lower), upper_(upper),
      w_({lower.count, upper.count, upper.dim, lower.dim}) {
    if (lower.count == 0 || lower.dim == 0 || upper.count == 0 || upper.dim == 0)
        throw ShapeError("capsule layer specs must have positive count and dim");
}

PredictionMaps PredictionMaps::gaussian_init(CapsuleLayerSpec lower, CapsuleLayerSpec upper,
                                             SeededRng& rng, double stddev) {
    PredictionMaps maps(lower, upper);
    Tensor& w = maps.weights();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = stddev * rng.next_gaussian();
    return maps;
}

CapsuleActivations::CapsuleActivations(CapsuleLayerSpec spec, Tensor vals)
    : layer(spec), values(std::move(vals)) {
    if (values.rank() != 2 || values.extent(0) != layer.count || values.extent(1) != layer.dim)
        throw ShapeError("capsule activations must be [count, dim] matching the layer spec");
}

} // namespace capspoe

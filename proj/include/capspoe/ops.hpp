#pragma once

#include "capspoe/rng.hpp"
#include "capspoe/tensor.hpp"

namespace capspoe {

/// Elementwise logistic 1/(1+exp(-x)). Output strictly inside (0,1).
Tensor sigmoid(const Tensor& x);

/// x where x >= 0, slope*x elsewhere. slope must lie in (0,1).
Tensor leaky_relu(const Tensor& x, double slope);

/// Valid cross-correlation of an [H,W,Cin] image with [kh,kw,Cin,Cout]
/// filters. Output is [H',W',Cout] with H' = (H-kh)/stride + 1.
Tensor conv2d_forward(const Tensor& input, const Tensor& filters, std::size_t stride);

struct Conv2dGrads {
    Tensor input;
    Tensor filters;
};

/// Exact gradients of conv2d_forward for the given upstream cotangent.
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& filters, std::size_t stride,
                            const Tensor& upstream);

/// Adjoint of conv2d_forward: maps an [H',W',Cout] feature map back to an
/// [out_h,out_w,Cin] image ("transposed convolution"). out_h/out_w must be a
/// valid forward input size for the given filters and stride.
Tensor conv2d_transpose(const Tensor& features, const Tensor& filters, std::size_t stride,
                        std::size_t out_h, std::size_t out_w);

/// i.i.d. standard normal tensor.
Tensor gaussian_sample(SeededRng& rng, std::vector<std::size_t> shape);

} // namespace capspoe

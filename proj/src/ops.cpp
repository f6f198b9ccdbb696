#include "capspoe/ops.hpp"

#include <cmath>
#include <string>

#include "capspoe/kernels.hpp"

namespace capspoe {

namespace {

// Shared shape checks for the conv family. Returns {oh, ow}.
std::pair<std::size_t, std::size_t> conv_out_shape(const Tensor& input, const Tensor& filters,
                                                   std::size_t stride) {
    if (input.rank() != 3) throw ShapeError("conv2d input must be [H,W,Cin]");
    if (filters.rank() != 4) throw ShapeError("conv2d filters must be [kh,kw,Cin,Cout]");
    std::size_t h = input.extent(0), w = input.extent(1), cin = input.extent(2);
    std::size_t kh = filters.extent(0), kw = filters.extent(1);
    if (filters.extent(2) != cin)
        throw ShapeError("conv2d filter Cin " + std::to_string(filters.extent(2)) +
                         " does not match input channels " + std::to_string(cin));
    if (kh > h || kw > w) throw ShapeError("conv2d filter larger than input");
    if (stride == 0) throw ShapeError("conv2d stride must be positive");
    if (stride > kh || stride > kw)
        throw ShapeError("conv2d stride exceeds kernel size; windows would skip input");
    return {(h - kh) / stride + 1, (w - kw) / stride + 1};
}

} // namespace

Tensor sigmoid(const Tensor& x) {
    require_finite(x, "sigmoid input");
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x[i]));
    return out;
}

Tensor leaky_relu(const Tensor& x, double slope) {
    if (!(slope > 0.0 && slope < 1.0)) throw Error("leaky_relu slope must be in (0,1)");
    require_finite(x, "leaky_relu input");
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] >= 0.0 ? x[i] : slope * x[i];
    return out;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& filters, std::size_t stride) {
    auto [oh, ow] = conv_out_shape(input, filters, stride);
    std::size_t cout = filters.extent(3);
    Tensor out({oh, ow, cout});
    kernels::table().conv2d_forward(input.data(), input.extent(0), input.extent(1),
                                    input.extent(2), filters.data(), filters.extent(0),
                                    filters.extent(1), cout, stride, out.data(), oh, ow);
    require_finite(out, "conv2d_forward output");
    return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& filters, std::size_t stride,
                            const Tensor& upstream) {
    auto [oh, ow] = conv_out_shape(input, filters, stride);
    std::size_t cout = filters.extent(3);
    if (upstream.rank() != 3 || upstream.extent(0) != oh || upstream.extent(1) != ow ||
        upstream.extent(2) != cout)
        throw ShapeError("conv2d_backward upstream shape does not match forward output");
    Conv2dGrads g{Tensor(input.shape()), Tensor(filters.shape())};
    const auto& k = kernels::table();
    k.conv2d_grad_input(upstream.data(), oh, ow, cout, filters.data(), filters.extent(0),
                        filters.extent(1), input.extent(2), stride, g.input.data(),
                        input.extent(0), input.extent(1));
    k.conv2d_grad_filters(input.data(), input.extent(0), input.extent(1), input.extent(2),
                          upstream.data(), oh, ow, cout, filters.extent(0), filters.extent(1),
                          stride, g.filters.data());
    require_finite(g.input, "conv2d_backward grad_input");
    require_finite(g.filters, "conv2d_backward grad_filters");
    return g;
}

Tensor conv2d_transpose(const Tensor& features, const Tensor& filters, std::size_t stride,
                        std::size_t out_h, std::size_t out_w) {
    if (features.rank() != 3) throw ShapeError("conv2d_transpose features must be [H',W',Cout]");
    if (filters.rank() != 4) throw ShapeError("conv2d_transpose filters must be [kh,kw,Cin,Cout]");
    std::size_t kh = filters.extent(0), kw = filters.extent(1);
    std::size_t cin = filters.extent(2), cout = filters.extent(3);
    if (features.extent(2) != cout)
        throw ShapeError("conv2d_transpose feature channels do not match filter Cout");
    if (stride == 0 || kh > out_h || kw > out_w || stride > kh || stride > kw)
        throw ShapeError("conv2d_transpose target shape incompatible with filters/stride");
    if ((out_h - kh) / stride + 1 != features.extent(0) ||
        (out_w - kw) / stride + 1 != features.extent(1))
        throw ShapeError("conv2d_transpose target shape is not a valid forward input shape");
    Tensor out({out_h, out_w, cin});
    kernels::table().conv2d_grad_input(features.data(), features.extent(0), features.extent(1),
                                       cout, filters.data(), kh, kw, cin, stride, out.data(),
                                       out_h, out_w);
    require_finite(out, "conv2d_transpose output");
    return out;
}

Tensor gaussian_sample(SeededRng& rng, std::vector<std::size_t> shape) {
    Tensor out(std::move(shape));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = rng.next_gaussian();
    return out;
}

} // namespace capspoe

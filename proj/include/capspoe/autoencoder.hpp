#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "capspoe/capsules.hpp"
#include "capspoe/optimizer.hpp"
#include "capspoe/rng.hpp"
#include "capspoe/tensor.hpp"

namespace capspoe {

/// Architecture of the two-layer convolutional autoencoder. The encoder is
/// conv(k,stride1) -> leaky relu -> conv(k,stride2) -> sigmoid; the decoder
/// mirrors it with transposed convolutions: deconv(stride2) -> leaky relu ->
/// deconv(stride1) -> sigmoid. Defaults give 28x28x1 -> 6x6x128 and back.
struct AutoencoderConfig {
    std::size_t image_h = 28;
    std::size_t image_w = 28;
    std::size_t in_channels = 1;
    std::size_t kernel = 9;
    std::size_t channels = 128;
    std::size_t stride1 = 1;
    std::size_t stride2 = 2;
    double dropout_rate = 0.5; // applied to the first hidden activation, training only
    double leaky_slope = 0.01;

    std::size_t enc1_h() const { return (image_h - kernel) / stride1 + 1; }
    std::size_t enc1_w() const { return (image_w - kernel) / stride1 + 1; }
    std::size_t feat_h() const { return (enc1_h() - kernel) / stride2 + 1; }
    std::size_t feat_w() const { return (enc1_w() - kernel) / stride2 + 1; }

    void validate() const;
};

struct AutoencoderParams {
    AutoencoderConfig cfg;
    Tensor enc1; // [k,k,Cin,channels]
    Tensor enc2; // [k,k,channels,channels]
    Tensor dec1; // [k,k,channels,channels], transposed use
    Tensor dec2; // [k,k,Cin,channels], transposed use

    static AutoencoderParams gaussian_init(const AutoencoderConfig& cfg, SeededRng& rng);
};

/// Image [H,W,Cin] with pixels in [0,1] -> features [h2,w2,channels] in (0,1).
/// Evaluation mode: no dropout.
Tensor encode(const AutoencoderParams& p, const Tensor& image);

/// Features back to an image of the configured shape, values in (0,1).
Tensor decode(const AutoencoderParams& p, const Tensor& features);

struct AeTrainOptions {
    std::size_t epochs = 3;      // total target epoch count
    std::size_t start_epoch = 0; // nonzero when resuming from a checkpoint
    std::size_t batch = 64;
    int threads = 0;
    std::uint64_t seed = 1;
};

/// Optimizer state for all four filter banks; restorable from a checkpoint
/// so an interrupted run resumes bit-identically.
struct AeOptimizerState {
    SgdMomentumState enc1, enc2, dec1, dec2;

    static AeOptimizerState fresh(const AutoencoderParams& p, const SgdHyper& h);
};

struct AeEpochStats {
    std::size_t epoch = 0;
    double mean_mse = 0.0;
    double first_batch_mse = 0.0; // of this epoch
    double last_lr = 0.0;
};

/// Reconstruction training with dropout on the first hidden layer. dataset
/// is [S,H,W,Cin] in [0,1]. Deterministic under (seed, config); thread count
/// does not change results. Metrics lines (epoch, step, mse, grad_norm, lr)
/// go to `metrics` when non-null.
std::vector<AeEpochStats> train_autoencoder(AutoencoderParams& p, const Tensor& dataset,
                                            const AeTrainOptions& opts, AeOptimizerState& opt,
                                            std::ostream* metrics);

/// Per-sample loss and parameter gradients (dropout mask drawn from rng when
/// training is true). Exposed for gradient checking.
struct AeGrads {
    Tensor enc1, enc2, dec1, dec2;
    double mse = 0.0;
};
AeGrads autoencoder_backward(const AutoencoderParams& p, const Tensor& image, bool training,
                             SeededRng& rng);
double autoencoder_loss(const AutoencoderParams& p, const Tensor& image, bool training,
                        SeededRng& rng);

/// [h,w,channels] feature map -> capsules of dimension `dim` by flat
/// row-major grouping: `dim` consecutive channels at one spatial location
/// form one capsule. Exact inverse provided.
CapsuleActivations capsulize(const Tensor& features, std::size_t dim = 8);
Tensor uncapsulize(const CapsuleActivations& caps, std::size_t h, std::size_t w,
                   std::size_t channels);

} // namespace capspoe

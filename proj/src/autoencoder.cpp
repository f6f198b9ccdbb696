#include "capspoe/autoencoder.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "capspoe/kernels.hpp"
#include "capspoe/ops.hpp"
#include "capspoe/parallel.hpp"

namespace capspoe {

void AutoencoderConfig::validate() const {
    if (image_h == 0 || image_w == 0 || in_channels == 0 || channels == 0)
        throw ShapeError("autoencoder config: extents must be positive");
    if (kernel == 0 || kernel > image_h || kernel > image_w)
        throw ShapeError("autoencoder config: kernel does not fit the image");
    if (stride1 == 0 || stride2 == 0 || stride1 > kernel || stride2 > kernel)
        throw ShapeError("autoencoder config: strides must be in [1, kernel]");
    if (enc1_h() < kernel || enc1_w() < kernel)
        throw ShapeError("autoencoder config: second conv does not fit the first layer output");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw Error("autoencoder config: dropout rate must be in [0,1)");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0))
        throw Error("autoencoder config: leaky slope must be in (0,1)");
}

AutoencoderParams AutoencoderParams::gaussian_init(const AutoencoderConfig& cfg, SeededRng& rng) {
    cfg.validate();
    AutoencoderParams p;
    p.cfg = cfg;
    auto init = [&](std::vector<std::size_t> shape) {
        double stddev = 1.0 / std::sqrt(static_cast<double>(shape[0] * shape[1] * shape[2]));
        Tensor t(std::move(shape));
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = stddev * rng.next_gaussian();
        return t;
    };
    std::size_t k = cfg.kernel, c = cfg.channels, ci = cfg.in_channels;
    p.enc1 = init({k, k, ci, c});
    p.enc2 = init({k, k, c, c});
    p.dec1 = init({k, k, c, c});
    p.dec2 = init({k, k, ci, c});
    return p;
}

namespace {

void check_image(const AutoencoderConfig& cfg, const Tensor& image) {
    if (image.rank() != 3 || image.extent(0) != cfg.image_h || image.extent(1) != cfg.image_w ||
        image.extent(2) != cfg.in_channels)
        throw ShapeError("autoencoder: image shape does not match the configuration");
    for (std::size_t i = 0; i < image.size(); ++i) {
        double v = image[i];
        if (!(v >= 0.0 && v <= 1.0)) throw Error("autoencoder: pixel values must lie in [0,1]");
    }
}

struct ForwardPass {
    Tensor z1, a1, d1, mask; // first conv, activation, dropout
    Tensor a2;               // features (sigmoid)
    Tensor z3, a3;           // first decoder stage
    Tensor xhat;             // reconstruction
    double mse = 0.0;
};

// Inverted dropout: kept units scale by 1/keep so evaluation needs no
// rescale. rate 0 never touches the rng.
Tensor dropout_mask(const Tensor& like, double rate, SeededRng& rng) {
    Tensor mask(like.shape(), 1.0);
    if (rate == 0.0) return mask;
    double keep = 1.0 - rate;
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = rng.next_bernoulli(keep) ? 1.0 / keep : 0.0;
    return mask;
}

ForwardPass forward(const AutoencoderParams& p, const Tensor& image, bool training,
                    SeededRng& rng) {
    const AutoencoderConfig& cfg = p.cfg;
    check_image(cfg, image);
    ForwardPass f;
    f.z1 = conv2d_forward(image, p.enc1, cfg.stride1);
    f.a1 = leaky_relu(f.z1, cfg.leaky_slope);
    if (training && cfg.dropout_rate > 0.0) {
        f.mask = dropout_mask(f.a1, cfg.dropout_rate, rng);
        f.d1 = Tensor(f.a1.shape());
        for (std::size_t i = 0; i < f.d1.size(); ++i) f.d1[i] = f.a1[i] * f.mask[i];
    } else {
        f.mask = Tensor(f.a1.shape(), 1.0);
        f.d1 = f.a1;
    }
    f.a2 = sigmoid(conv2d_forward(f.d1, p.enc2, cfg.stride2));
    f.z3 = conv2d_transpose(f.a2, p.dec1, cfg.stride2, cfg.enc1_h(), cfg.enc1_w());
    f.a3 = leaky_relu(f.z3, cfg.leaky_slope);
    f.xhat = sigmoid(conv2d_transpose(f.a3, p.dec2, cfg.stride1, cfg.image_h, cfg.image_w));

    double se = 0.0;
    for (std::size_t i = 0; i < f.xhat.size(); ++i) {
        double d = f.xhat[i] - image[i];
        se += d * d;
    }
    f.mse = se / static_cast<double>(f.xhat.size());
    return f;
}

} // namespace

Tensor encode(const AutoencoderParams& p, const Tensor& image) {
    const AutoencoderConfig& cfg = p.cfg;
    check_image(cfg, image);
    Tensor a1 = leaky_relu(conv2d_forward(image, p.enc1, cfg.stride1), cfg.leaky_slope);
    return sigmoid(conv2d_forward(a1, p.enc2, cfg.stride2));
}

Tensor decode(const AutoencoderParams& p, const Tensor& features) {
    const AutoencoderConfig& cfg = p.cfg;
    if (features.rank() != 3 || features.extent(0) != cfg.feat_h() ||
        features.extent(1) != cfg.feat_w() || features.extent(2) != cfg.channels)
        throw ShapeError("decode: feature shape does not match the encoder output");
    Tensor z3 = conv2d_transpose(features, p.dec1, cfg.stride2, cfg.enc1_h(), cfg.enc1_w());
    Tensor a3 = leaky_relu(z3, cfg.leaky_slope);
    return sigmoid(conv2d_transpose(a3, p.dec2, cfg.stride1, cfg.image_h, cfg.image_w));
}

double autoencoder_loss(const AutoencoderParams& p, const Tensor& image, bool training,
                        SeededRng& rng) {
    return forward(p, image, training, rng).mse;
}

AeGrads autoencoder_backward(const AutoencoderParams& p, const Tensor& image, bool training,
                             SeededRng& rng) {
    const AutoencoderConfig& cfg = p.cfg;
    ForwardPass f = forward(p, image, training, rng);

    // d(mse)/d(xhat) through the output sigmoid
    Tensor g4(f.xhat.shape());
    double scale = 2.0 / static_cast<double>(f.xhat.size());
    for (std::size_t i = 0; i < g4.size(); ++i)
        g4[i] = scale * (f.xhat[i] - image[i]) * f.xhat[i] * (1.0 - f.xhat[i]);

    AeGrads g;
    g.mse = f.mse;
    // transposed-conv layers: gradient w.r.t. filters swaps the roles of the
    // image-side and feature-side tensors; gradient w.r.t. features is the
    // forward convolution
    g.dec2 = conv2d_backward(g4, p.dec2, cfg.stride1, f.a3).filters;
    Tensor g3 = conv2d_forward(g4, p.dec2, cfg.stride1);
    for (std::size_t i = 0; i < g3.size(); ++i)
        if (f.z3[i] < 0.0) g3[i] *= cfg.leaky_slope;

    g.dec1 = conv2d_backward(g3, p.dec1, cfg.stride2, f.a2).filters;
    Tensor g2 = conv2d_forward(g3, p.dec1, cfg.stride2);
    for (std::size_t i = 0; i < g2.size(); ++i) g2[i] *= f.a2[i] * (1.0 - f.a2[i]);

    Conv2dGrads enc2g = conv2d_backward(f.d1, p.enc2, cfg.stride2, g2);
    g.enc2 = std::move(enc2g.filters);
    Tensor g1 = std::move(enc2g.input);
    for (std::size_t i = 0; i < g1.size(); ++i) {
        g1[i] *= f.mask[i];
        if (f.z1[i] < 0.0) g1[i] *= cfg.leaky_slope;
    }
    g.enc1 = conv2d_backward(image, p.enc1, cfg.stride1, g1).filters;
    return g;
}

AeOptimizerState AeOptimizerState::fresh(const AutoencoderParams& p, const SgdHyper& h) {
    return {SgdMomentumState(p.enc1, h), SgdMomentumState(p.enc2, h),
            SgdMomentumState(p.dec1, h), SgdMomentumState(p.dec2, h)};
}

std::vector<AeEpochStats> train_autoencoder(AutoencoderParams& p, const Tensor& dataset,
                                            const AeTrainOptions& opts, AeOptimizerState& opt,
                                            std::ostream* metrics) {
    const AutoencoderConfig& cfg = p.cfg;
    cfg.validate();
    if (dataset.rank() != 4 || dataset.extent(1) != cfg.image_h ||
        dataset.extent(2) != cfg.image_w || dataset.extent(3) != cfg.in_channels)
        throw ShapeError("autoencoder training set must be [S,H,W,C] matching the config");
    if (opts.batch == 0) throw Error("batch size must be positive");

    std::size_t S = dataset.extent(0);
    std::size_t px = cfg.image_h * cfg.image_w * cfg.in_channels;
    std::size_t threads = resolve_thread_count(opts.threads);

    SgdMomentumState& s_enc1 = opt.enc1;
    SgdMomentumState& s_enc2 = opt.enc2;
    SgdMomentumState& s_dec1 = opt.dec1;
    SgdMomentumState& s_dec2 = opt.dec2;

    std::vector<AeGrads> slots(threads);
    AeGrads acc;
    std::vector<std::size_t> order(S);
    std::vector<AeEpochStats> stats;
    const auto& k = kernels::table();

    std::size_t steps_per_epoch = (S + opts.batch - 1) / opts.batch;
    for (std::size_t epoch = opts.start_epoch; epoch < opts.epochs; ++epoch) {
        std::size_t step = epoch * steps_per_epoch;
        SeededRng shuffle_rng(SeededRng::stream_seed(opts.seed, 0x73687566ULL, epoch));
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = S; i > 1; --i) {
            std::size_t j =
                static_cast<std::size_t>(shuffle_rng.next_uniform() * static_cast<double>(i));
            if (j >= i) j = i - 1;
            std::swap(order[i - 1], order[j]);
        }

        AeEpochStats es;
        es.epoch = epoch;
        double epoch_se = 0.0;
        bool first_batch = true;
        for (std::size_t start = 0; start < S; start += opts.batch) {
            std::size_t count = std::min(opts.batch, S - start);
            acc.enc1 = Tensor(p.enc1.shape());
            acc.enc2 = Tensor(p.enc2.shape());
            acc.dec1 = Tensor(p.dec1.shape());
            acc.dec2 = Tensor(p.dec2.shape());
            double batch_mse = 0.0;

            deterministic_rounds(
                count, threads,
                [&](std::size_t item, std::size_t slot) {
                    std::size_t sample = order[start + item];
                    SeededRng rng(SeededRng::stream_seed(opts.seed, epoch, sample));
                    Tensor image({cfg.image_h, cfg.image_w, cfg.in_channels},
                                 std::vector<double>(dataset.data() + sample * px,
                                                     dataset.data() + (sample + 1) * px));
                    slots[slot] = autoencoder_backward(p, image, true, rng);
                },
                [&](std::size_t, std::size_t slot) {
                    k.axpy(acc.enc1.size(), 1.0, slots[slot].enc1.data(), acc.enc1.data());
                    k.axpy(acc.enc2.size(), 1.0, slots[slot].enc2.data(), acc.enc2.data());
                    k.axpy(acc.dec1.size(), 1.0, slots[slot].dec1.data(), acc.dec1.data());
                    k.axpy(acc.dec2.size(), 1.0, slots[slot].dec2.data(), acc.dec2.data());
                    batch_mse += slots[slot].mse;
                });

            double inv = 1.0 / static_cast<double>(count);
            for (Tensor* t : {&acc.enc1, &acc.enc2, &acc.dec1, &acc.dec2})
                for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] *= inv;

            double gnorm = std::sqrt(k.dot(acc.enc1.size(), acc.enc1.data(), acc.enc1.data()) +
                                     k.dot(acc.enc2.size(), acc.enc2.data(), acc.enc2.data()) +
                                     k.dot(acc.dec1.size(), acc.dec1.data(), acc.dec1.data()) +
                                     k.dot(acc.dec2.size(), acc.dec2.data(), acc.dec2.data()));
            double lr_used = s_enc1.learning_rate;
            sgd_step(p.enc1, acc.enc1, s_enc1);
            sgd_step(p.enc2, acc.enc2, s_enc2);
            sgd_step(p.dec1, acc.dec1, s_dec1);
            sgd_step(p.dec2, acc.dec2, s_dec2);

            batch_mse *= inv;
            if (first_batch) {
                es.first_batch_mse = batch_mse;
                first_batch = false;
            }
            epoch_se += batch_mse * static_cast<double>(count);
            es.last_lr = lr_used;
            ++step;
            if (metrics) {
                char line[160];
                std::snprintf(line, sizeof line,
                              "epoch=%zu step=%zu mse=%.12g grad_norm=%.12g lr=%.12g\n", epoch,
                              step, batch_mse, gnorm, lr_used);
                *metrics << line;
            }
        }
        es.mean_mse = epoch_se / static_cast<double>(S);
        if (metrics) {
            char line[120];
            std::snprintf(line, sizeof line, "epoch=%zu mean_mse=%.12g\n", epoch, es.mean_mse);
            *metrics << line;
        }
        stats.push_back(es);
    }
    return stats;
}

CapsuleActivations capsulize(const Tensor& features, std::size_t dim) {
    if (features.rank() != 3) throw ShapeError("capsulize expects [H,W,C] features");
    if (dim == 0 || features.size() % dim != 0)
        throw ShapeError("capsulize: feature count not divisible by the capsule dimension");
    std::size_t count = features.size() / dim;
    return CapsuleActivations({count, dim}, features.reshaped({count, dim}));
}

Tensor uncapsulize(const CapsuleActivations& caps, std::size_t h, std::size_t w,
                   std::size_t channels) {
    if (caps.values.size() != h * w * channels)
        throw ShapeError("uncapsulize: element count does not match the target shape");
    return caps.values.reshaped({h, w, channels});
}

} // namespace capspoe

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "capspoe/autoencoder.hpp"
#include "support.hpp"

using namespace capspoe;
using testsupport::rel_err;

namespace {

AutoencoderConfig small_config() {
    // 12x12 downscaled configuration for gradient checks
    AutoencoderConfig c;
    c.image_h = 12;
    c.image_w = 12;
    c.in_channels = 1;
    c.kernel = 5;
    c.channels = 4;
    c.stride1 = 1;
    c.stride2 = 2;
    c.dropout_rate = 0.5;
    c.leaky_slope = 0.01;
    return c;
}

} // namespace

TEST_CASE("encode shapes: 28x28 MNIST and 32x32 CIFAR") {
    SeededRng rng(1);
    AutoencoderConfig mnist;
    CHECK(mnist.enc1_h() == 20);
    CHECK(mnist.feat_h() == 6);
    AutoencoderParams p = AutoencoderParams::gaussian_init(mnist, rng);
    Tensor img = testsupport::random_unit_tensor({28, 28, 1}, rng);
    Tensor f = encode(p, img);
    CHECK(f.shape() == std::vector<std::size_t>{6, 6, 128});
    for (std::size_t k = 0; k < f.size(); ++k) {
        CHECK(f[k] > 0.0);
        CHECK(f[k] < 1.0);
    }

    AutoencoderConfig cifar;
    cifar.image_h = cifar.image_w = 32;
    cifar.in_channels = 3;
    CHECK(cifar.feat_h() == 8);
    AutoencoderParams pc = AutoencoderParams::gaussian_init(cifar, rng);
    Tensor rgb = testsupport::random_unit_tensor({32, 32, 3}, rng);
    CHECK(encode(pc, rgb).shape() == std::vector<std::size_t>{8, 8, 128});
}

TEST_CASE("zero filters map everything to one half") {
    SeededRng rng(2);
    AutoencoderConfig cfg = small_config();
    AutoencoderParams p = AutoencoderParams::gaussian_init(cfg, rng);
    p.enc1 = Tensor(p.enc1.shape());
    p.enc2 = Tensor(p.enc2.shape());
    p.dec1 = Tensor(p.dec1.shape());
    p.dec2 = Tensor(p.dec2.shape());
    Tensor img({12, 12, 1});
    Tensor f = encode(p, img);
    for (std::size_t k = 0; k < f.size(); ++k) CHECK(f[k] == 0.5);
    Tensor x = decode(p, f);
    CHECK(x.shape() == std::vector<std::size_t>{12, 12, 1});
    for (std::size_t k = 0; k < x.size(); ++k) CHECK(x[k] == 0.5);
}

TEST_CASE("decode inverts the encoder's shape map") {
    SeededRng rng(3);
    AutoencoderConfig cfg = small_config();
    AutoencoderParams p = AutoencoderParams::gaussian_init(cfg, rng);
    Tensor img = testsupport::random_unit_tensor({12, 12, 1}, rng);
    Tensor back = decode(p, encode(p, img));
    CHECK(back.shape() == img.shape());

    CHECK_THROWS_AS(decode(p, Tensor({3, 3, 4})), ShapeError);
    CHECK_THROWS_AS(encode(p, Tensor({5, 5, 1})), ShapeError);

    Tensor bad({12, 12, 1}, 2.0);
    CHECK_THROWS(encode(p, bad)); // pixels outside [0,1]
}

TEST_CASE("all four filter-bank gradients match finite differences (12x12 config)") {
    SeededRng rng(5);
    AutoencoderConfig cfg = small_config();
    AutoencoderParams p = AutoencoderParams::gaussian_init(cfg, rng);
    Tensor img = testsupport::random_unit_tensor({12, 12, 1}, rng);

    // dropout active: the mask must come out identically for every
    // evaluation, so each call gets a fresh stream with the same seed
    const std::uint64_t mask_seed = 909;
    SeededRng grng(mask_seed);
    AeGrads g = autoencoder_backward(p, img, true, grng);

    auto check_bank = [&](Tensor& bank, const Tensor& analytic) {
        Tensor fd = testsupport::finite_diff(
            bank,
            [&]() {
                SeededRng r(mask_seed);
                return autoencoder_loss(p, img, true, r);
            },
            1e-5);
        for (std::size_t k = 0; k < fd.size(); ++k)
            CHECK(rel_err(analytic[k], fd[k], 1e-5) < 1e-5);
    };
    check_bank(p.enc1, g.enc1);
    check_bank(p.enc2, g.enc2);
    check_bank(p.dec1, g.dec1);
    check_bank(p.dec2, g.dec2);
}

TEST_CASE("dropout: rate zero is the identity, evaluation never drops") {
    SeededRng rng(7);
    AutoencoderConfig cfg = small_config();
    cfg.dropout_rate = 0.0;
    AutoencoderParams p = AutoencoderParams::gaussian_init(cfg, rng);
    Tensor img = testsupport::random_unit_tensor({12, 12, 1}, rng);

    SeededRng r1(1), r2(2);
    CHECK(autoencoder_loss(p, img, true, r1) == autoencoder_loss(p, img, false, r2));

    // nonzero rate: training loss differs from evaluation loss for the same
    // parameters (the mask hits some units), but evaluation is unaffected
    // by the rng entirely
    p.cfg.dropout_rate = 0.5;
    SeededRng r3(3), r4(4);
    CHECK(autoencoder_loss(p, img, false, r3) == autoencoder_loss(p, img, false, r4));
}

TEST_CASE("capsulize: 6x6x128 -> 576x8, 8x8x128 -> 1024x8, exact inverse") {
    SeededRng rng(9);
    Tensor f6 = testsupport::random_unit_tensor({6, 6, 128}, rng);
    CapsuleActivations caps = capsulize(f6);
    CHECK(caps.layer.count == 576);
    CHECK(caps.layer.dim == 8);
    // channel-major grouping: capsule 0 is channels 0..7 at location (0,0)
    for (std::size_t d = 0; d < 8; ++d) CHECK(caps.values[d] == f6[d]);

    Tensor f8 = testsupport::random_unit_tensor({8, 8, 128}, rng);
    CHECK(capsulize(f8).layer.count == 1024);

    Tensor back = uncapsulize(caps, 6, 6, 128);
    CHECK(back == f6);

    Tensor odd = testsupport::random_unit_tensor({3, 3, 3}, rng);
    CHECK_THROWS_AS(capsulize(odd), ShapeError);
    CHECK_THROWS_AS(uncapsulize(caps, 5, 5, 128), ShapeError);
}

TEST_CASE("training: zero learning rate leaves parameters unchanged") {
    SeededRng rng(11);
    AutoencoderConfig cfg = small_config();
    AutoencoderParams p = AutoencoderParams::gaussian_init(cfg, rng);
    AutoencoderParams before = p;
    Tensor data = testsupport::random_unit_tensor({6, 12, 12, 1}, rng);

    AeTrainOptions opts;
    opts.epochs = 2;
    opts.batch = 3;
    opts.threads = 2;
    opts.seed = 21;
    AeOptimizerState opt = AeOptimizerState::fresh(p, SgdHyper{0.0, 0.0, 1.0, 0.0});
    train_autoencoder(p, data, opts, opt, nullptr);
    CHECK(p.enc1 == before.enc1);
    CHECK(p.enc2 == before.enc2);
    CHECK(p.dec1 == before.dec1);
    CHECK(p.dec2 == before.dec2);
}

TEST_CASE("training: deterministic across runs and thread counts") {
    SeededRng drng(13);
    Tensor data = testsupport::random_unit_tensor({5, 12, 12, 1}, drng);

    auto run = [&](int threads) {
        SeededRng rng(15);
        AutoencoderParams p = AutoencoderParams::gaussian_init(small_config(), rng);
        AeTrainOptions opts;
        opts.epochs = 2;
        opts.batch = 2;
        opts.threads = threads;
        opts.seed = 23;
        AeOptimizerState opt = AeOptimizerState::fresh(p, SgdHyper{0.05, 0.9, 0.999, 1e-4});
        train_autoencoder(p, data, opts, opt, nullptr);
        return p;
    };
    AutoencoderParams a = run(1);
    AutoencoderParams b = run(3);
    CHECK(a.enc1 == b.enc1);
    CHECK(a.enc2 == b.enc2);
    CHECK(a.dec1 == b.dec1);
    CHECK(a.dec2 == b.dec2);
}

TEST_CASE("training: reconstruction improves on structured data") {
    Tensor data = testsupport::make_stroke_images(40, 12, 12, 99).reshaped({40, 12, 12, 1});
    SeededRng rng(17);
    AutoencoderConfig cfg = small_config();
    cfg.dropout_rate = 0.2;
    AutoencoderParams p = AutoencoderParams::gaussian_init(cfg, rng);

    AeTrainOptions opts;
    opts.epochs = 4;
    opts.batch = 8;
    opts.threads = 2;
    opts.seed = 31;
    AeOptimizerState opt = AeOptimizerState::fresh(p, SgdHyper{0.5, 0.9, 0.999, 1e-5});
    std::ostringstream log;
    auto stats = train_autoencoder(p, data, opts, opt, &log);
    REQUIRE(stats.size() == 4);
    CHECK(stats.back().mean_mse < stats.front().first_batch_mse);
    CHECK(log.str().find("epoch=0 step=1 mse=") == 0);
}

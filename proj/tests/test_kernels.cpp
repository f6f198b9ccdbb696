#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "capspoe/kernels.hpp"
#include "capspoe/ops.hpp"
#include "capspoe/optimizer.hpp"
#include "support.hpp"

using namespace capspoe;
using testsupport::finite_diff;
using testsupport::rel_err;

TEST_CASE("sigmoid: fixed points and symmetry") {
    Tensor x({3}, std::vector<double>{0.0, 2.0, -2.0});
    Tensor y = sigmoid(x);
    CHECK(y[0] == 0.5);
    // high-precision reference value for sigmoid(2), 30 digits
    CHECK(y[1] == doctest::Approx(0.880797077977882444059729141302).epsilon(1e-15));
    CHECK(y[1] + y[2] == doctest::Approx(1.0).epsilon(1e-15));

    SeededRng rng(1);
    Tensor r = testsupport::random_tensor({64}, rng, 3.0);
    Tensor s = sigmoid(r);
    Tensor neg(r.shape());
    for (std::size_t i = 0; i < r.size(); ++i) neg[i] = -r[i];
    Tensor sneg = sigmoid(neg);
    for (std::size_t i = 0; i < r.size(); ++i) {
        CHECK(s[i] > 0.0);
        CHECK(s[i] < 1.0);
        CHECK(rel_err(s[i], 1.0 - sneg[i]) < 1e-14);
    }

    Tensor bad({1}, std::vector<double>{std::nan("")});
    CHECK_THROWS_AS(sigmoid(bad), NumericError);
}

TEST_CASE("leaky relu") {
    Tensor x({3}, std::vector<double>{3.0, -2.0, 0.0});
    Tensor y = leaky_relu(x, 0.01);
    CHECK(y[0] == 3.0);
    CHECK(y[1] == doctest::Approx(-0.02));
    CHECK(y[2] == 0.0);
    CHECK_THROWS(leaky_relu(x, 1.5));
    CHECK_THROWS(leaky_relu(x, 0.0));
}

TEST_CASE("conv2d shape arithmetic") {
    SeededRng rng(2);
    Tensor img = testsupport::random_unit_tensor({28, 28, 1}, rng);
    Tensor f1 = testsupport::random_tensor({9, 9, 1, 128}, rng, 0.05);
    Tensor o1 = conv2d_forward(img, f1, 1);
    CHECK(o1.shape() == std::vector<std::size_t>{20, 20, 128});

    Tensor f2 = testsupport::random_tensor({9, 9, 128, 128}, rng, 0.01);
    Tensor o2 = conv2d_forward(o1, f2, 2);
    CHECK(o2.shape() == std::vector<std::size_t>{6, 6, 128});

    // 1x1 identity filter leaves the input unchanged
    Tensor tiny({1, 1, 1}, std::vector<double>{0.37});
    Tensor ident({1, 1, 1, 1}, std::vector<double>{1.0});
    Tensor same = conv2d_forward(tiny, ident, 1);
    CHECK(same[0] == 0.37);

    CHECK_THROWS_AS(conv2d_forward(tiny, f1, 1), ShapeError);   // filter larger than input
    Tensor f3 = testsupport::random_tensor({2, 2, 1, 1}, rng);
    CHECK_THROWS_AS(conv2d_forward(img, f3, 3), ShapeError);    // stride skips input
}

TEST_CASE("conv2d forward matches a naive quadruple loop") {
    SeededRng rng(5);
    for (std::size_t stride : {std::size_t(1), std::size_t(2)}) {
        Tensor in = testsupport::random_tensor({6, 7, 3}, rng);
        Tensor filt = testsupport::random_tensor({3, 2, 3, 5}, rng);
        Tensor out = conv2d_forward(in, filt, stride);
        std::size_t oh = out.extent(0), ow = out.extent(1);
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox)
                for (std::size_t c = 0; c < 5; ++c) {
                    double acc = 0.0;
                    for (std::size_t ky = 0; ky < 3; ++ky)
                        for (std::size_t kx = 0; kx < 2; ++kx)
                            for (std::size_t ci = 0; ci < 3; ++ci)
                                acc += in.at({oy * stride + ky, ox * stride + kx, ci}) *
                                       filt.at({ky, kx, ci, c});
                    CHECK(rel_err(out.at({oy, ox, c}), acc, 1e-9) < 1e-12);
                }
    }
}

TEST_CASE("conv2d backward matches finite differences") {
    SeededRng rng(7);
    for (std::size_t stride : {std::size_t(1), std::size_t(2)}) {
        Tensor in = testsupport::random_tensor({5, 5, 2}, rng);
        Tensor filt = testsupport::random_tensor({3, 3, 2, 4}, rng);
        Tensor cot = testsupport::random_tensor(conv2d_forward(in, filt, stride).shape(), rng);

        auto loss = [&]() {
            Tensor out = conv2d_forward(in, filt, stride);
            double acc = 0.0;
            for (std::size_t k = 0; k < out.size(); ++k) acc += out[k] * cot[k];
            return acc;
        };
        Conv2dGrads g = conv2d_backward(in, filt, stride, cot);
        Tensor fd_f = finite_diff(filt, loss);
        Tensor fd_i = finite_diff(in, loss);
        for (std::size_t k = 0; k < fd_f.size(); ++k)
            CHECK(rel_err(fd_f[k], g.filters[k], 1e-4) < 1e-6);
        for (std::size_t k = 0; k < fd_i.size(); ++k)
            CHECK(rel_err(fd_i[k], g.input[k], 1e-4) < 1e-6);
    }
}

TEST_CASE("conv2d backward: zero upstream and linearity") {
    SeededRng rng(8);
    Tensor in = testsupport::random_tensor({4, 4, 2}, rng);
    Tensor filt = testsupport::random_tensor({2, 2, 2, 3}, rng);
    Tensor zero(conv2d_forward(in, filt, 1).shape());
    Conv2dGrads gz = conv2d_backward(in, filt, 1, zero);
    for (std::size_t k = 0; k < gz.filters.size(); ++k) CHECK(gz.filters[k] == 0.0);
    for (std::size_t k = 0; k < gz.input.size(); ++k) CHECK(gz.input[k] == 0.0);

    Tensor up = testsupport::random_tensor(zero.shape(), rng);
    Tensor up2(up.shape());
    for (std::size_t k = 0; k < up.size(); ++k) up2[k] = 2.0 * up[k];
    Conv2dGrads g1 = conv2d_backward(in, filt, 1, up);
    Conv2dGrads g2 = conv2d_backward(in, filt, 1, up2);
    for (std::size_t k = 0; k < g1.filters.size(); ++k)
        CHECK(rel_err(2.0 * g1.filters[k], g2.filters[k], 1e-9) < 1e-12);

    CHECK_THROWS_AS(conv2d_backward(in, filt, 1, Tensor({1, 1, 3})), ShapeError);
}

TEST_CASE("conv2d_transpose is the adjoint of conv2d_forward") {
    SeededRng rng(9);
    Tensor in = testsupport::random_tensor({6, 6, 2}, rng);
    Tensor filt = testsupport::random_tensor({3, 3, 2, 4}, rng);
    Tensor feat = testsupport::random_tensor(conv2d_forward(in, filt, 2).shape(), rng);
    Tensor back = conv2d_transpose(feat, filt, 2, 6, 6);
    // <conv(x), f> == <x, convT(f)>
    Tensor fwd = conv2d_forward(in, filt, 2);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t k = 0; k < fwd.size(); ++k) lhs += fwd[k] * feat[k];
    for (std::size_t k = 0; k < in.size(); ++k) rhs += in[k] * back[k];
    CHECK(rel_err(lhs, rhs) < 1e-12);
}

TEST_CASE("sgd_step: basic updates and hand-unrolled momentum") {
    Tensor p({2}, std::vector<double>{0.0, 1.0});
    SgdMomentumState st(p, SgdHyper{0.1, 0.0, 1.0, 0.0});
    Tensor g({2}, std::vector<double>{1.0, 0.0});
    sgd_step(p, g, st);
    CHECK(p[0] == doctest::Approx(-0.1));
    CHECK(p[1] == 1.0); // zero grad, zero velocity, zero l2

    // l2 shrinkage with zero grad
    Tensor q({1}, std::vector<double>{2.0});
    SgdMomentumState st2(q, SgdHyper{0.1, 0.0, 1.0, 0.5});
    Tensor zg({1}, std::vector<double>{0.0});
    sgd_step(q, zg, st2);
    CHECK(q[0] == doctest::Approx(2.0 - 0.1 * 0.5 * 2.0));

    // two steps with momentum 0.9 against the recurrence unrolled by hand
    double lr = 0.05, mom = 0.9, decay = 0.99, l2 = 0.01;
    double p0 = 0.7, g1 = 0.3, g2 = -0.2;
    Tensor pp({1}, std::vector<double>{p0});
    SgdMomentumState st3(pp, SgdHyper{lr, mom, decay, l2});
    sgd_step(pp, Tensor({1}, std::vector<double>{g1}), st3);
    sgd_step(pp, Tensor({1}, std::vector<double>{g2}), st3);

    double v1 = mom * 0.0 - lr * (g1 + l2 * p0);
    double p1 = p0 + v1;
    double lr1 = lr * decay;
    double v2 = mom * v1 - lr1 * (g2 + l2 * p1);
    double p2 = p1 + v2;
    CHECK(pp[0] == p2);
    CHECK(st3.learning_rate == lr1 * decay);

    CHECK_THROWS_AS(sgd_step(pp, Tensor({3}), st3), ShapeError);
}

TEST_CASE("gaussian_sample: determinism and shape") {
    SeededRng a(11), b(11), c(12);
    Tensor ta = gaussian_sample(a, {3, 5});
    Tensor tb = gaussian_sample(b, {3, 5});
    Tensor tc = gaussian_sample(c, {3, 5});
    CHECK(ta == tb);
    CHECK(ta.shape() == std::vector<std::size_t>{3, 5});
    bool differs = false;
    for (std::size_t k = 0; k < ta.size(); ++k) differs = differs || ta[k] != tc[k];
    CHECK(differs);
}

TEST_CASE("kernels: scalar and avx2 backends agree bitwise") {
    if (!kernels::backend_available(kernels::Backend::Avx2)) return;
    const auto& sc = kernels::table_for(kernels::Backend::Scalar);
    const auto& vx = kernels::table_for(kernels::Backend::Avx2);
    SeededRng rng(21);

    for (int trial = 0; trial < 40; ++trial) {
        std::size_t n = 1 + static_cast<std::size_t>(rng.next_uniform() * 77);
        std::vector<double> x(n), y(n), a(n), b(n);
        for (std::size_t k = 0; k < n; ++k) {
            x[k] = rng.next_gaussian() * std::pow(10.0, 4.0 * rng.next_gaussian());
            y[k] = rng.next_gaussian();
            a[k] = b[k] = y[k];
        }
        CHECK(sc.dot(n, x.data(), y.data()) == vx.dot(n, x.data(), y.data()));
        sc.axpy(n, 1.37, x.data(), a.data());
        vx.axpy(n, 1.37, x.data(), b.data());
        CHECK(a == b);

        std::vector<double> va(n), vb(n), pa(x), pb(x);
        sc.sgd_update(n, pa.data(), va.data(), y.data(), 0.03, 0.9, 1e-4);
        vx.sgd_update(n, pb.data(), vb.data(), y.data(), 0.03, 0.9, 1e-4);
        CHECK(pa == pb);
        CHECK(va == vb);
    }

    // matvec / transpose / outer on rectangular shapes
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t rows = 1 + static_cast<std::size_t>(rng.next_uniform() * 20);
        std::size_t cols = 1 + static_cast<std::size_t>(rng.next_uniform() * 20);
        std::vector<double> m(rows * cols), xr(cols), xc(rows);
        for (auto& v : m) v = rng.next_gaussian();
        for (auto& v : xr) v = rng.next_gaussian();
        for (auto& v : xc) v = rng.next_gaussian();
        std::vector<double> za(rows), zb(rows), ta(cols), tb(cols);
        sc.matvec(rows, cols, m.data(), xr.data(), za.data());
        vx.matvec(rows, cols, m.data(), xr.data(), zb.data());
        CHECK(za == zb);
        sc.matvec_t(rows, cols, m.data(), xc.data(), ta.data());
        vx.matvec_t(rows, cols, m.data(), xc.data(), tb.data());
        CHECK(ta == tb);
        std::vector<double> ga(rows * cols, 0.1), gb(rows * cols, 0.1);
        sc.outer_accum(rows, cols, -0.7, xc.data(), xr.data(), ga.data());
        vx.outer_accum(rows, cols, -0.7, xc.data(), xr.data(), gb.data());
        CHECK(ga == gb);
    }

    // conv kernels across strides, odd channel counts exercise the SIMD tail
    for (std::size_t stride : {std::size_t(1), std::size_t(2), std::size_t(3)}) {
        std::size_t h = 9, w = 8, cin = 3, kh = 3, kw = 3, cout = 19;
        std::size_t oh = (h - kh) / stride + 1, ow = (w - kw) / stride + 1;
        std::vector<double> in(h * w * cin), filt(kh * kw * cin * cout);
        std::vector<double> up(oh * ow * cout);
        for (auto& v : in) v = rng.next_gaussian();
        for (auto& v : filt) v = rng.next_gaussian();
        for (auto& v : up) v = rng.next_gaussian();

        std::vector<double> oa(oh * ow * cout), ob(oh * ow * cout);
        sc.conv2d_forward(in.data(), h, w, cin, filt.data(), kh, kw, cout, stride, oa.data(), oh,
                          ow);
        vx.conv2d_forward(in.data(), h, w, cin, filt.data(), kh, kw, cout, stride, ob.data(), oh,
                          ow);
        CHECK(oa == ob);

        std::vector<double> gia(h * w * cin), gib(h * w * cin);
        sc.conv2d_grad_input(up.data(), oh, ow, cout, filt.data(), kh, kw, cin, stride,
                             gia.data(), h, w);
        vx.conv2d_grad_input(up.data(), oh, ow, cout, filt.data(), kh, kw, cin, stride,
                             gib.data(), h, w);
        CHECK(gia == gib);

        std::vector<double> gfa(kh * kw * cin * cout), gfb(kh * kw * cin * cout);
        sc.conv2d_grad_filters(in.data(), h, w, cin, up.data(), oh, ow, cout, kh, kw, stride,
                               gfa.data());
        vx.conv2d_grad_filters(in.data(), h, w, cin, up.data(), oh, ow, cout, kh, kw, stride,
                               gfb.data());
        CHECK(gfa == gfb);
    }
}

TEST_CASE("kernels: pure, identical inputs give identical outputs") {
    SeededRng rng(31);
    Tensor in = testsupport::random_tensor({5, 5, 2}, rng);
    Tensor filt = testsupport::random_tensor({3, 3, 2, 4}, rng);
    Tensor a = conv2d_forward(in, filt, 1);
    Tensor b = conv2d_forward(in, filt, 1);
    CHECK(a == b);
}

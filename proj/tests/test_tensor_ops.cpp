#include <algorithm>
#include <vector>

#include "doctest.h"
#include "rtsr/errors.hpp"
#include "rtsr/ops.hpp"
#include "rtsr/parallel.hpp"
#include "test_util.hpp"

using namespace rtsr;
using rtsr::testing::conv_oracle;
using rtsr::testing::random_conv;
using rtsr::testing::random_tensor;

TEST_CASE("tensor shape and storage") {
    Tensor t({2, 3, 4, 5});
    CHECK(t.numel() == 120);
    CHECK(t.data().size() == 120);
    CHECK(Tensor().empty());
    CHECK_THROWS_AS(Tensor({1, 0, 2, 2}), ShapeError);
    CHECK_THROWS_AS(Tensor({1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
}

TEST_CASE("conv2d scalar multiply-add") {
    ConvParams p = ConvParams::make(1, 1, 1, true);
    p.weight.data()[0] = 3.0f;
    (*p.bias)[0] = 0.5f;
    const Tensor out = conv2d(Tensor({1, 1, 1, 1}, std::vector<float>{2.0f}), p);
    CHECK(out.shape() == Shape{1, 1, 1, 1});
    CHECK(out.data()[0] == doctest::Approx(6.5));
}

TEST_CASE("conv2d all-ones 3x3 with padding 1") {
    ConvParams p = ConvParams::make(1, 1, 3, false);
    std::fill(p.weight.data().begin(), p.weight.data().end(), 1.0f);
    const Tensor out = conv2d(Tensor::full({1, 1, 3, 3}, 1.0f), p);
    const std::vector<float> expected{4, 6, 4, 6, 9, 6, 4, 6, 4};
    for (std::size_t i = 0; i < 9; ++i) CHECK(out.data()[i] == expected[i]);
}

TEST_CASE("conv2d dirac kernel is the identity") {
    ConvParams p = ConvParams::make(1, 1, 3, false);
    p.weight.at(0, 0, 1, 1) = 1.0f;
    const Tensor x = random_tensor({1, 1, 6, 7}, 3);
    CHECK(conv2d(x, p) == x);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
    struct Case {
        Shape in;
        std::int64_t out;
        int k, stride, groups, padding;
        bool bias;
    };
    const std::vector<Case> cases{
        {{2, 3, 8, 8}, 4, 3, 1, 1, 1, true},  {{1, 3, 7, 5}, 2, 1, 1, 1, 0, false}, {{2, 2, 8, 8}, 6, 3, 2, 1, 1, true},
        {{1, 4, 8, 8}, 4, 3, 1, 4, 1, false}, {{2, 3, 8, 6}, 5, 5, 1, 1, 2, true},  {{1, 2, 4, 4}, 2, 2, 2, 1, 0, true},
        {{2, 6, 5, 8}, 4, 3, 1, 2, 0, true},
    };
    std::uint64_t seed = 10;
    for (const auto& c : cases) {
        ConvParams p = random_conv(c.in.c, c.out, c.k, c.bias, seed++, c.stride, c.groups);
        p.padding = c.padding;
        const Tensor x = random_tensor(c.in, seed++);
        const Tensor got = conv2d(x, p);
        const Tensor want = conv_oracle(x, p);
        REQUIRE(got.shape() == want.shape());
        CHECK(max_abs_diff(got, want) <= 1e-5f);
    }
}

TEST_CASE("conv2d is linear without bias") {
    const ConvParams p = random_conv(3, 4, 3, false, 21);
    const Tensor x = random_tensor({2, 3, 8, 8}, 22);
    const Tensor y = random_tensor({2, 3, 8, 8}, 23);
    const float a = 0.7f;
    const float b = -1.3f;
    Tensor mix(x.shape());
    for (std::size_t i = 0; i < mix.data().size(); ++i) mix.data()[i] = a * x.data()[i] + b * y.data()[i];
    const Tensor lhs = conv2d(mix, p);
    const Tensor cx = conv2d(x, p);
    const Tensor cy = conv2d(y, p);
    float err = 0.0f;
    for (std::size_t i = 0; i < lhs.data().size(); ++i)
        err = std::max(err, std::abs(lhs.data()[i] - (a * cx.data()[i] + b * cy.data()[i])));
    CHECK(err <= 1e-4f);
}

TEST_CASE("conv2d errors") {
    const ConvParams p = random_conv(3, 2, 3, false, 1);
    CHECK_THROWS_AS(conv2d(Tensor({1, 2, 5, 5}), p), ShapeError);
    ConvParams big = random_conv(1, 1, 5, false, 2);
    big.padding = 0;
    CHECK_THROWS_AS(conv2d(Tensor({1, 1, 3, 3}), big), ShapeError);
    try {
        conv2d(Tensor({1, 2, 5, 5}), p);
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("(1,2,5,5)") != std::string::npos);
        CHECK(msg.find("(2,3,3,3)") != std::string::npos);
    }
}

TEST_CASE("conv2d is bit-identical across thread counts") {
    const ConvParams p = random_conv(8, 8, 3, true, 31);
    const Tensor x = random_tensor({2, 8, 33, 29}, 32);
    set_thread_count(1);
    const Tensor one = conv2d(x, p);
    set_thread_count(3);
    const Tensor three = conv2d(x, p);
    set_thread_count(1);
    CHECK(one == three);
}

TEST_CASE("pixel shuffle index formula") {
    const Tensor x({1, 4, 1, 1}, std::vector<float>{1, 2, 3, 4});
    const Tensor y = pixel_shuffle(x, 2);
    CHECK(y.shape() == Shape{1, 1, 2, 2});
    CHECK(y.data()[0] == 1);
    CHECK(y.data()[1] == 2);
    CHECK(y.data()[2] == 3);
    CHECK(y.data()[3] == 4);
    CHECK(pixel_unshuffle(y, 2) == x);
    CHECK(pixel_shuffle(x, 1) == x);
    CHECK(pixel_unshuffle(x, 1) == x);
}

TEST_CASE("pixel shuffle matches its definition on random data") {
    const int r = 3;
    const Tensor x = random_tensor({2, 18, 4, 5}, 41);
    const Tensor y = pixel_shuffle(x, r);
    REQUIRE(y.shape() == Shape{2, 2, 12, 15});
    for (std::int64_t n = 0; n < 2; ++n)
        for (std::int64_t c = 0; c < 2; ++c)
            for (std::int64_t yy = 0; yy < 4; ++yy)
                for (std::int64_t xx = 0; xx < 5; ++xx)
                    for (int dy = 0; dy < r; ++dy)
                        for (int dx = 0; dx < r; ++dx)
                            CHECK(y.at(n, c, yy * r + dy, xx * r + dx) == x.at(n, c * r * r + dy * r + dx, yy, xx));
}

TEST_CASE("shuffle and unshuffle are bit-exact inverses") {
    for (int r : {1, 2, 3, 4}) {
        const Tensor a = random_tensor({2, 3 * r * r, 5, 4}, 50 + r);
        CHECK(pixel_unshuffle(pixel_shuffle(a, r), r) == a);
        const Tensor b = random_tensor({2, 3, 4 * r, 2 * r}, 60 + r);
        CHECK(pixel_shuffle(pixel_unshuffle(b, r), r) == b);
    }
}

TEST_CASE("pixel shuffle preserves the multiset of values") {
    const Tensor x = random_tensor({1, 16, 3, 3}, 71);
    const Tensor y = pixel_shuffle(x, 4);
    std::vector<float> a(x.data().begin(), x.data().end());
    std::vector<float> b(y.data().begin(), y.data().end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
}

TEST_CASE("shuffle errors") {
    CHECK_THROWS_AS(pixel_shuffle(Tensor({1, 3, 2, 2}), 2), ShapeError);
    CHECK_THROWS_AS(pixel_unshuffle(Tensor({1, 1, 3, 4}), 2), ShapeError);
    CHECK_THROWS_AS(pixel_shuffle(Tensor({1, 4, 2, 2}), 0), Error);
}

TEST_CASE("activations") {
    CHECK(activation_scalar(-1.0f, ActivationKind::relu) == 0.0f);
    CHECK(activation_scalar(2.0f, ActivationKind::relu) == 2.0f);
    CHECK(activation_scalar(0.0f, ActivationKind::sigmoid_centered) == 0.0f);
    CHECK(activation_scalar(0.0f, ActivationKind::gelu_tanh_approx) == 0.0f);
    CHECK(activation_scalar(0.0f, ActivationKind::sigmoid) == doctest::Approx(0.5));
    CHECK(activation_scalar(-3.5f, ActivationKind::identity) == -3.5f);
    // tanh-approximate GELU stays within 1e-3 of the erf form
    for (float x = -4.0f; x <= 4.0f; x += 0.25f) {
        const double exact = 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
        CHECK(std::abs(activation_scalar(x, ActivationKind::gelu_tanh_approx) - exact) < 1e-3);
    }
}

TEST_CASE("sigmoid_centered is odd") {
    const Tensor x = random_tensor({1, 1, 16, 16}, 81, -8.0f, 8.0f);
    Tensor neg(x.shape());
    for (std::size_t i = 0; i < x.data().size(); ++i) neg.data()[i] = -x.data()[i];
    const Tensor a = activation_apply(x, ActivationKind::sigmoid_centered);
    const Tensor b = activation_apply(neg, ActivationKind::sigmoid_centered);
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        CHECK(std::abs(a.data()[i] + b.data()[i]) <= 1e-6f);
        CHECK(a.data()[i] == doctest::Approx(1.0 / (1.0 + std::exp(-x.data()[i])) - 0.5).epsilon(1e-5));
    }
}

TEST_CASE("elementwise and concat") {
    const Tensor x = random_tensor({1, 2, 3, 3}, 91);
    CHECK(add(x, Tensor::zeros(x.shape())) == x);
    CHECK(mul(x, Tensor::full(x.shape(), 1.0f)) == x);
    CHECK_THROWS_AS(add(x, Tensor({1, 2, 3, 2})), ShapeError);

    const Tensor a = random_tensor({1, 2, 2, 2}, 92);
    const Tensor b = random_tensor({1, 3, 2, 2}, 93);
    const std::vector<Tensor> parts{a, b};
    const Tensor c = concat_channels(parts);
    REQUIRE(c.shape() == Shape{1, 5, 2, 2});
    for (std::int64_t ch = 0; ch < 5; ++ch)
        for (std::int64_t i = 0; i < 4; ++i)
            CHECK(c.plane(0, ch)[i] == (ch < 2 ? a.plane(0, ch)[i] : b.plane(0, ch - 2)[i]));
    CHECK(slice_channels(c, 2, 5) == b);
    const std::vector<Tensor> bad{a, Tensor({1, 1, 3, 2})};
    CHECK_THROWS_AS(concat_channels(bad), ShapeError);
}

TEST_CASE("pad and crop are inverse on the interior") {
    const Tensor x = random_tensor({2, 3, 4, 5}, 101);
    const Tensor p = pad_zero(x, 2);
    CHECK(p.shape() == Shape{2, 3, 8, 9});
    CHECK(p.at(1, 2, 0, 0) == 0.0f);
    CHECK(crop(p, 2) == x);
}

TEST_CASE("conv2d adjoints") {
    // <conv(x), g> == <x, conv^T(g)> and the weight gradient matches the same pairing.
    const ConvParams p = random_conv(4, 6, 3, true, 111, 2, 2);
    const Tensor x = random_tensor({2, 4, 9, 8}, 112);
    const Tensor y = conv2d(x, p, 1);
    const Tensor g = random_tensor(y.shape(), 113);
    const Tensor gx = conv2d_backward_input(g, p, 1, x.shape());
    double lhs = 0.0;
    double rhs = 0.0;
    for (std::size_t i = 0; i < y.data().size(); ++i) lhs += static_cast<double>(y.data()[i]) * g.data()[i];
    double bias_term = 0.0;
    for (std::int64_t n = 0; n < y.shape().n; ++n)
        for (std::int64_t c = 0; c < y.shape().c; ++c)
            for (std::int64_t i = 0; i < y.shape().plane(); ++i)
                bias_term += static_cast<double>((*p.bias)[static_cast<std::size_t>(c)]) * g.plane(n, c)[i];
    for (std::size_t i = 0; i < x.data().size(); ++i) rhs += static_cast<double>(x.data()[i]) * gx.data()[i];
    CHECK(lhs == doctest::Approx(rhs + bias_term).epsilon(1e-5));

    const ConvGrads pg = conv2d_backward_params(x, g, p, 1);
    double wpair = 0.0;
    for (std::size_t i = 0; i < p.weight.data().size(); ++i) wpair += static_cast<double>(p.weight.data()[i]) * pg.weight.data()[i];
    double bpair = 0.0;
    for (std::size_t i = 0; i < pg.bias.size(); ++i) bpair += static_cast<double>((*p.bias)[i]) * pg.bias[i];
    CHECK(lhs == doctest::Approx(wpair + bpair).epsilon(1e-5));
}

#include <cmath>
#include <vector>

#include "doctest.h"
#include "rtsr/errors.hpp"
#include "rtsr/ops.hpp"
#include "rtsr/reparam.hpp"
#include "test_util.hpp"

using namespace rtsr;
using rtsr::testing::random_conv;
using rtsr::testing::random_tensor;

namespace {

// Affine blocks see their input zero-padded once by the block radius, and every
// stage inside runs as a valid convolution.
Tensor valid(const Tensor& x, const ConvParams& p) { return conv2d(x, p, 0); }

ConvParams stencil_conv(std::int64_t c, const float (&k)[9], const std::vector<float>& scale) {
    ConvParams p = ConvParams::make(c, c, 3, false);
    p.weight = Tensor(p.weight.shape());
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (int i = 0; i < 9; ++i) p.weight.at(ch, ch, i / 3, i % 3) = k[i] * scale[static_cast<std::size_t>(ch)];
    return p;
}

std::vector<float> random_scale(std::int64_t c, std::uint64_t seed) {
    const Tensor t = random_tensor({1, c, 1, 1}, seed, 0.2f, 1.5f);
    return {t.data().begin(), t.data().end()};
}

float max_over_inputs(const ConvParams& fused, std::int64_t in, int trials, const auto& reference) {
    float err = 0.0f;
    for (int t = 0; t < trials; ++t) {
        const Tensor x = random_tensor({1, in, 9, 8}, 500 + t);
        err = std::max(err, max_abs_diff(conv2d(x, fused), reference(x)));
    }
    return err;
}

}  // namespace

TEST_CASE("fixed stencils") {
    const auto sx = fixed_stencil(FixedFilterKind::sobel_x);
    const auto sy = fixed_stencil(FixedFilterKind::sobel_y);
    const auto lap = fixed_stencil(FixedFilterKind::laplacian);
    CHECK(sx == std::array<float, 9>{1, 0, -1, 2, 0, -2, 1, 0, -1});
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) CHECK(sy[r * 3 + c] == sx[c * 3 + r]);
    CHECK(lap == std::array<float, 9>{0, 1, 0, 1, -4, 1, 0, 1, 0});
}

TEST_CASE("fuse_sequential") {
    SUBCASE("scalar 1x1 chain") {
        ConvParams a = ConvParams::make(1, 1, 1, true);
        a.weight.data()[0] = 2.0f;
        (*a.bias)[0] = 1.0f;
        ConvParams b = ConvParams::make(1, 1, 1, true);
        b.weight.data()[0] = 3.0f;
        (*b.bias)[0] = 0.5f;
        const ConvParams f = fuse_sequential(a, b);
        CHECK(f.weight.data()[0] == 6.0f);
        REQUIRE(f.bias);
        CHECK((*f.bias)[0] == 3.5f);
    }
    SUBCASE("1x1 expand then 3x3 project vs two passes") {
        const ConvParams a = random_conv(8, 32, 1, true, 1);
        const ConvParams b = random_conv(32, 8, 3, true, 2);
        const ConvParams f = fuse_sequential(a, b);
        CHECK(f.kernel_h() == 3);
        const float err =
            max_over_inputs(f, 8, 20, [&](const Tensor& x) { return valid(valid(pad_zero(x, 1), a), b); });
        CHECK(err <= 1e-4f);
    }
    SUBCASE("3x3 then 1x1 vs two passes") {
        const ConvParams a = random_conv(4, 6, 3, true, 3);
        const ConvParams b = random_conv(6, 5, 1, true, 4);
        const ConvParams f = fuse_sequential(a, b);
        CHECK(max_over_inputs(f, 4, 10, [&](const Tensor& x) { return valid(valid(pad_zero(x, 1), a), b); }) <=
              1e-4f);
    }
    SUBCASE("dirac is a two-sided identity") {
        const ConvParams k = random_conv(5, 5, 3, true, 5);
        const ConvParams left = fuse_sequential(dirac(5, 1), k);
        const ConvParams right = fuse_sequential(k, dirac(5, 1));
        CHECK(max_abs_diff(left.weight, k.weight) <= 1e-6f);
        CHECK(max_abs_diff(right.weight, k.weight) <= 1e-6f);
        for (std::size_t i = 0; i < k.bias->size(); ++i) {
            CHECK(std::abs((*left.bias)[i] - (*k.bias)[i]) <= 1e-6f);
            CHECK(std::abs((*right.bias)[i] - (*k.bias)[i]) <= 1e-6f);
        }
    }
    SUBCASE("1x1 chains are associative") {
        const ConvParams a = random_conv(6, 7, 1, true, 10);
        const ConvParams b = random_conv(7, 9, 1, true, 11);
        const ConvParams c = random_conv(9, 4, 1, true, 12);
        const ConvParams lr = fuse_sequential(fuse_sequential(a, b), c);
        const ConvParams rl = fuse_sequential(a, fuse_sequential(b, c));
        const Tensor x = random_tensor({2, 6, 5, 5}, 13);
        CHECK(max_abs_diff(conv2d(x, lr), conv2d(x, rl)) <= 1e-5f);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(fuse_sequential(random_conv(4, 5, 1, false, 1), random_conv(6, 4, 3, false, 2)), ShapeError);
        CHECK_THROWS_AS(fuse_sequential(random_conv(4, 4, 3, false, 1), random_conv(4, 4, 3, false, 2)), ShapeError);
        CHECK_THROWS_AS(fuse_sequential(random_conv(4, 4, 1, false, 1, 2), random_conv(4, 4, 1, false, 2)),
                        ShapeError);
    }
}

TEST_CASE("fuse_parallel_sum") {
    SUBCASE("two identical branches double the weights") {
        const ConvParams a = random_conv(3, 4, 3, true, 20);
        const std::vector<ConvParams> br{a, a};
        const ConvParams f = fuse_parallel_sum(br);
        for (std::size_t i = 0; i < a.weight.data().size(); ++i) CHECK(f.weight.data()[i] == 2.0f * a.weight.data()[i]);
        for (std::size_t i = 0; i < a.bias->size(); ++i) CHECK((*f.bias)[i] == 2.0f * (*a.bias)[i]);
    }
    SUBCASE("3x3 plus 1x1 vs summed forwards") {
        const ConvParams a = random_conv(5, 6, 3, true, 21);
        const ConvParams b = random_conv(5, 6, 1, true, 22);
        const std::vector<ConvParams> br{a, b};
        const ConvParams f = fuse_parallel_sum(br);
        CHECK(f.kernel_h() == 3);
        CHECK(max_over_inputs(f, 5, 10, [&](const Tensor& x) { return add(conv2d(x, a, 1), conv2d(x, b, 0)); }) <=
              1e-4f);
    }
    SUBCASE("single branch is returned unchanged") {
        const ConvParams a = random_conv(3, 3, 3, true, 23);
        const std::vector<ConvParams> br{a};
        const ConvParams f = fuse_parallel_sum(br);
        CHECK(max_abs_diff(f.weight, a.weight) == 0.0f);
        CHECK(*f.bias == *a.bias);
    }
    SUBCASE("heterogeneous channels are rejected") {
        const std::vector<ConvParams> br{random_conv(3, 4, 3, false, 1), random_conv(3, 5, 3, false, 2)};
        CHECK_THROWS_AS(fuse_parallel_sum(br), ShapeError);
    }
}

TEST_CASE("lower_branch") {
    SUBCASE("identity reproduces the input") {
        const ConvParams f = lower_branch(BranchGraph::identity(3));
        const Tensor x = random_tensor({1, 3, 6, 7}, 30);
        CHECK(max_abs_diff(conv2d(x, f), x) == 0.0f);
    }
    SUBCASE("channel scale") {
        const auto s = random_scale(4, 31);
        const ConvParams f = lower_branch(BranchGraph::channel_scale(s));
        const Tensor x = random_tensor({1, 4, 5, 5}, 32);
        CHECK(max_abs_diff(conv2d(x, f), channel_scale(x, s)) <= 1e-7f);
    }
    SUBCASE("sobel of a constant image is zero") {
        const ConvParams f = lower_branch(BranchGraph::fixed_filter(FixedFilterKind::sobel_x, {1.0f, 1.0f}));
        const Tensor y = conv2d(Tensor::full({1, 2, 6, 6}, 0.7f), f);
        // Interior only: zero padding makes the border see a step.
        for (std::int64_t c = 0; c < 2; ++c)
            for (std::int64_t r = 1; r < 5; ++r)
                for (std::int64_t q = 1; q < 5; ++q) CHECK(y.at(0, c, r, q) == doctest::Approx(0.0).epsilon(1e-7));
    }
    SUBCASE("ECB-style block vs branch-by-branch evaluation") {
        const std::int64_t c = 6, m = 12;
        const ConvParams k3 = random_conv(c, c, 3, true, 40);
        const ConvParams e1 = random_conv(c, m, 1, true, 41);
        const ConvParams e3 = random_conv(m, c, 3, true, 42);
        const ConvParams sx1 = random_conv(c, c, 1, true, 43);
        const ConvParams sy1 = random_conv(c, c, 1, true, 44);
        const ConvParams l1 = random_conv(c, c, 1, true, 45);
        const auto sxs = random_scale(c, 46), sys = random_scale(c, 47), ls = random_scale(c, 48);
        const BranchGraph g = BranchGraph::parallel_sum({
            BranchGraph::conv(k3),
            BranchGraph::sequential({BranchGraph::conv(e1), BranchGraph::conv(e3)}),
            BranchGraph::sequential({BranchGraph::conv(sx1), BranchGraph::fixed_filter(FixedFilterKind::sobel_x, sxs)}),
            BranchGraph::sequential({BranchGraph::conv(sy1), BranchGraph::fixed_filter(FixedFilterKind::sobel_y, sys)}),
            BranchGraph::sequential({BranchGraph::conv(l1), BranchGraph::fixed_filter(FixedFilterKind::laplacian, ls)}),
        });
        const float kx[9] = {1, 0, -1, 2, 0, -2, 1, 0, -1};
        const float ky[9] = {1, 2, 1, 0, 0, 0, -1, -2, -1};
        const float kl[9] = {0, 1, 0, 1, -4, 1, 0, 1, 0};
        const ConvParams f = lower_branch(g);
        CHECK(f.kernel_h() == 3);
        const float err = max_over_inputs(f, c, 20, [&](const Tensor& x) {
            const Tensor p = pad_zero(x, 1);
            Tensor y = valid(p, k3);
            y = add(y, valid(valid(p, e1), e3));
            y = add(y, valid(valid(p, sx1), stencil_conv(c, kx, sxs)));
            y = add(y, valid(valid(p, sy1), stencil_conv(c, ky, sys)));
            return add(y, valid(valid(p, l1), stencil_conv(c, kl, ls)));
        });
        CHECK(err <= 1e-4f);
        CHECK(verify_equivalence(g, f, 100, 1e-4f).pass);
    }
    SUBCASE("nested blocks lower inside out") {
        const std::int64_t c = 4;
        const BranchGraph inner = BranchGraph::parallel_sum(
            {BranchGraph::conv(random_conv(8, 8, 3, true, 50)), BranchGraph::conv(random_conv(8, 8, 1, true, 51)),
             BranchGraph::identity(8)});
        const BranchGraph g = BranchGraph::parallel_sum(
            {BranchGraph::identity(c), BranchGraph::sequential({BranchGraph::conv(random_conv(c, 8, 1, true, 52)),
                                                                inner,
                                                                BranchGraph::conv(random_conv(8, c, 1, true, 53))})});
        CHECK(verify_equivalence(g, lower_branch(g), 100, 1e-4f).pass);
    }
    SUBCASE("singleton parallel sum lowers exactly like its child") {
        const BranchGraph child = BranchGraph::sequential(
            {BranchGraph::conv(random_conv(3, 5, 1, true, 60)), BranchGraph::conv(random_conv(5, 3, 3, true, 61))});
        const ConvParams a = lower_branch(child);
        const ConvParams b = lower_branch(BranchGraph::parallel_sum({child}));
        CHECK(max_abs_diff(a.weight, b.weight) == 0.0f);
        CHECK(*a.bias == *b.bias);
    }
    SUBCASE("activations inside a block are refused with the node named") {
        const BranchGraph g = BranchGraph::sequential({BranchGraph::conv(random_conv(3, 3, 1, false, 1)),
                                                       BranchGraph::activation(ActivationKind::relu),
                                                       BranchGraph::conv(random_conv(3, 3, 3, false, 2))});
        CHECK_THROWS_AS(lower_branch(g), ShapeError);
        try {
            lower_branch(g);
        } catch (const ShapeError& e) {
            CHECK(std::string(e.what()).find("relu") != std::string::npos);
        }
    }
}

TEST_CASE("fuse_dual_stream") {
    auto zero = [](std::int64_t in, std::int64_t out) {
        ConvParams p = ConvParams::make(in, out, 3, false);
        p.weight = Tensor(p.weight.shape());
        return p;
    };
    SUBCASE("zero cross blocks act on each half independently") {
        DualStreamNode ds{random_conv(2, 3, 3, true, 70), zero(4, 3), zero(2, 5), random_conv(4, 5, 3, true, 71)};
        const ConvParams f = fuse_dual_stream(ds);
        const Tensor x = random_tensor({1, 6, 7, 7}, 72);
        const Tensor y = conv2d(x, f);
        CHECK(max_abs_diff(slice_channels(y, 0, 3), conv2d(slice_channels(x, 0, 2), ds.k_b, 1)) <= 1e-5f);
        CHECK(max_abs_diff(slice_channels(y, 3, 8), conv2d(slice_channels(x, 2, 6), ds.k_r, 1)) <= 1e-5f);
    }
    SUBCASE("one channel per stream vs explicit two-stream computation") {
        DualStreamNode ds{random_conv(1, 1, 3, true, 80), random_conv(1, 1, 3, true, 81),
                          random_conv(1, 1, 3, true, 82), random_conv(1, 1, 3, true, 83)};
        const ConvParams f = fuse_dual_stream(ds);
        const float err = max_over_inputs(f, 2, 20, [&](const Tensor& x) {
            const Tensor b = slice_channels(x, 0, 1), r = slice_channels(x, 1, 2);
            const Tensor parts[] = {add(conv2d(b, ds.k_b, 1), conv2d(r, ds.k_r2b, 1)),
                                    add(conv2d(b, ds.k_b2r, 1), conv2d(r, ds.k_r, 1))};
            return concat_channels(parts);
        });
        CHECK(err <= 1e-4f);
    }
    SUBCASE("identity diagonal and zero cross blocks give the identity") {
        ConvParams ib = dirac(2, 3), ir = dirac(3, 3);
        const ConvParams f = fuse_dual_stream({ib, zero(3, 2), zero(2, 3), ir});
        const Tensor x = random_tensor({1, 5, 6, 6}, 90);
        CHECK(max_abs_diff(conv2d(x, f), x) == 0.0f);
    }
    SUBCASE("inconsistent blocks are rejected") {
        CHECK_THROWS_AS(fuse_dual_stream({random_conv(2, 3, 3, false, 1), zero(4, 2), zero(2, 5),
                                          random_conv(4, 5, 3, false, 2)}),
                        ShapeError);
    }
}

TEST_CASE("strip_bias") {
    const ConvParams p = random_conv(3, 4, 3, true, 100);
    const ConvParams s = strip_bias(p);
    CHECK_FALSE(s.bias.has_value());
    CHECK(max_abs_diff(s.weight, p.weight) == 0.0f);
    const Tensor x = random_tensor({1, 3, 5, 5}, 101);
    const Tensor yp = conv2d(x, p), ys = conv2d(x, s);
    for (std::int64_t o = 0; o < 4; ++o)
        for (std::int64_t y = 0; y < 5; ++y)
            for (std::int64_t q = 0; q < 5; ++q)
                CHECK(yp.at(0, o, y, q) - ys.at(0, o, y, q) == doctest::Approx((*p.bias)[static_cast<std::size_t>(o)]).epsilon(1e-5));
    const ConvParams twice = strip_bias(s);
    CHECK_FALSE(twice.bias.has_value());
    CHECK(max_abs_diff(twice.weight, s.weight) == 0.0f);

    ConvParams zb = p;
    std::fill(zb.bias->begin(), zb.bias->end(), 0.0f);
    CHECK(max_abs_diff(conv2d(x, zb), conv2d(x, strip_bias(zb))) == 0.0f);
}

TEST_CASE("verify_equivalence") {
    const ConvParams p = random_conv(3, 4, 3, true, 110);
    const auto same = verify_equivalence(BranchGraph::conv(p), p, 5, 1e-4f);
    CHECK(same.max_abs_err == 0.0f);
    CHECK(same.pass);

    ConvParams bad = p;
    bad.weight.data()[4] += 1.0f;
    const auto r = verify_equivalence(BranchGraph::conv(p), bad, 5, 1e-4f);
    CHECK_FALSE(r.pass);
    CHECK(r.max_abs_err >= 0.1f);

    CHECK_THROWS_AS(verify_equivalence(BranchGraph::conv(p), random_conv(3, 5, 3, true, 1), 2, 1e-4f), ShapeError);
}

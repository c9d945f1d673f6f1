#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "rtsr/errors.hpp"
#include "rtsr/ops.hpp"
#include "rtsr/resample.hpp"
#include "test_util.hpp"

using namespace rtsr;
using rtsr::testing::random_tensor;

namespace {

// Direct 2-D summation over every source pixel; weights built per axis and
// multiplied, without reusing the separable two-pass structure.
Tensor resample_oracle(const Tensor& img, std::int64_t oh, std::int64_t ow, int a) {
    const Shape& s = img.shape();
    auto axis = [a](std::int64_t in, std::int64_t out, std::int64_t d) {
        const double scale = static_cast<double>(in) / static_cast<double>(out);
        const double stretch = std::max(1.0, scale);
        const double center = (d + 0.5) * scale - 0.5;
        // Wide enough range that every nonzero tap is included; extra taps weigh 0.
        std::vector<std::pair<std::int64_t, double>> w;
        double sum = 0.0;
        const auto reach = static_cast<std::int64_t>(std::ceil(a * stretch)) + 2;
        for (std::int64_t t = static_cast<std::int64_t>(std::floor(center)) - reach;
             t <= static_cast<std::int64_t>(std::ceil(center)) + reach; ++t) {
            const double x = (t - center) / stretch;
            double v = 0.0;
            if (std::abs(x) < a) {
                if (x == 0.0) {
                    v = 1.0;
                } else if (x != std::round(x)) {
                    const double pi = 3.14159265358979323846;
                    v = std::sin(pi * x) / (pi * x) * std::sin(pi * x / a) / (pi * x / a);
                }
            }
            w.emplace_back(std::clamp<std::int64_t>(t, 0, in - 1), v);
            sum += v;
        }
        for (auto& p : w) p.second /= sum;
        return w;
    };
    Tensor out({s.n, s.c, oh, ow});
    for (std::int64_t n = 0; n < s.n; ++n)
        for (std::int64_t c = 0; c < s.c; ++c)
            for (std::int64_t y = 0; y < oh; ++y)
                for (std::int64_t x = 0; x < ow; ++x) {
                    const auto wy = axis(s.h, oh, y);
                    const auto wx = axis(s.w, ow, x);
                    double acc = 0.0;
                    for (const auto& [sy, vy] : wy)
                        for (const auto& [sx, vx] : wx) acc += vy * vx * img.at(n, c, sy, sx);
                    out.at(n, c, y, x) = static_cast<float>(acc);
                }
    return out;
}

Tensor ramp(std::int64_t h, std::int64_t w, std::int64_t c = 1) {
    Tensor t({1, c, h, w});
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x) t.at(0, ch, y, x) = 0.05f * y + 0.03f * x + 0.1f * ch;
    return t;
}

double mean(const Tensor& t) {
    double s = 0.0;
    for (float v : t.data()) s += v;
    return s / static_cast<double>(t.numel());
}

}  // namespace

TEST_CASE("lanczos weight closed form") {
    CHECK(lanczos_weight(0.0, 3) == 1.0);
    CHECK(lanczos_weight(1.0, 3) == 0.0);
    CHECK(lanczos_weight(2.0, 3) == 0.0);
    CHECK(lanczos_weight(-2.0, 3) == 0.0);
    CHECK(lanczos_weight(3.0, 3) == 0.0);
    CHECK(lanczos_weight(4.5, 3) == 0.0);
    CHECK(lanczos_weight(0.5, 3) == doctest::Approx(0.6079271018540267).epsilon(1e-12));
    CHECK(lanczos_weight(0.37, 5) == doctest::Approx(lanczos_weight(-0.37, 5)).epsilon(1e-15));
    CHECK_THROWS_AS(lanczos_weight(0.5, 0), UsageError);
}

TEST_CASE("constant images stay constant under every kernel and size") {
    const Tensor img = Tensor::full({1, 3, 13, 9}, 0.625f);
    for (const auto& k : {ResampleKernel::lanczos(3), ResampleKernel::lanczos(5), ResampleKernel::bicubic(),
                          ResampleKernel::nearest()}) {
        for (const auto& [oh, ow] : std::vector<std::pair<int, int>>{{4, 3}, {13, 9}, {26, 27}, {1, 1}, {7, 20}}) {
            const Tensor out = resample_image(img, oh, ow, k);
            CHECK(out.shape() == Shape{1, 3, oh, ow});
            for (float v : out.data()) REQUIRE(v == doctest::Approx(0.625f).epsilon(1e-6));
        }
    }
}

TEST_CASE("identity resize reproduces the input") {
    const Tensor img = random_tensor({2, 3, 11, 8}, 7, 0.0f, 1.0f);
    CHECK(max_abs_diff(resample_image(img, 11, 8, ResampleKernel::lanczos(3)), img) <= 1e-6f);
    CHECK(max_abs_diff(resample_image(img, 11, 8, ResampleKernel::lanczos(5)), img) <= 1e-6f);
    CHECK(max_abs_diff(resample_image(img, 11, 8, ResampleKernel::nearest()), img) == 0.0f);
}

TEST_CASE("separable resample matches direct two-dimensional summation") {
    SUBCASE("4x4 ramp downsampled by two") {
        const Tensor img = ramp(4, 4);
        CHECK(max_abs_diff(resample_image(img, 2, 2, ResampleKernel::lanczos(3)), resample_oracle(img, 2, 2, 3)) <=
              1e-6f);
    }
    SUBCASE("random images, mixed ratios") {
        const Tensor img = random_tensor({1, 2, 10, 13}, 3, 0.0f, 1.0f);
        for (const auto& [oh, ow, a] : std::vector<std::tuple<int, int, int>>{
                 {3, 4, 5}, {5, 7, 3}, {20, 26, 3}, {17, 6, 5}, {10, 13, 2}}) {
            CAPTURE(oh);
            CAPTURE(ow);
            CHECK(max_abs_diff(resample_image(img, oh, ow, ResampleKernel::lanczos(a)),
                               resample_oracle(img, oh, ow, a)) <= 1e-6f);
        }
    }
}

TEST_CASE("resample rejects empty sizes") {
    const Tensor img = Tensor::full({1, 1, 4, 4}, 0.5f);
    CHECK_THROWS_AS(resample_image(img, 0, 4, ResampleKernel::lanczos(3)), ShapeError);
    CHECK_THROWS_AS(resample_image(img, 4, 0, ResampleKernel::lanczos(3)), ShapeError);
    CHECK_THROWS_AS(resample_image(Tensor({1, 1, 0, 4}), 2, 2, ResampleKernel::lanczos(3)), ShapeError);
}

TEST_CASE("downsampling a ramp preserves the mean") {
    const Tensor img = ramp(32, 24, 3);
    for (int s : {2, 3, 4}) {
        const Tensor lr = resample_image(img, 32 / s, 24 / s, ResampleKernel::lanczos(5));
        CHECK(std::abs(mean(lr) - mean(img)) <= 1e-3);
    }
}

TEST_CASE("degrade") {
    SUBCASE("8x8 constant at x4 gives a 2x2 constant") {
        const Tensor lr = degrade(Tensor::full({1, 3, 8, 8}, 0.5f), DegradationSpec{});
        CHECK(lr.shape() == Shape{1, 3, 2, 2});
        for (float v : lr.data()) CHECK(v == doctest::Approx(0.5f).epsilon(1e-6));
    }
    SUBCASE("scale 1 leaves the image unchanged") {
        const Tensor img = random_tensor({1, 3, 9, 9}, 11, 0.0f, 1.0f);
        DegradationSpec spec;
        spec.scale = 1;
        CHECK(max_abs_diff(degrade(img, spec), img) <= 1e-6f);
    }
    SUBCASE("equals the clamped lanczos-5 resample bit for bit") {
        const Tensor img = random_tensor({1, 3, 16, 16}, 5, 0.0f, 1.0f);
        Tensor expect = resample_image(img, 4, 4, ResampleKernel::lanczos(5));
        for (float& v : expect.data()) v = std::clamp(v, 0.0f, 1.0f);
        const Tensor lr = degrade(img, DegradationSpec{});
        REQUIRE(lr.shape() == expect.shape());
        CHECK(std::equal(lr.data().begin(), lr.data().end(), expect.data().begin()));
        const Tensor again = degrade(img, DegradationSpec{});
        CHECK(std::equal(lr.data().begin(), lr.data().end(), again.data().begin()));
    }
    SUBCASE("odd sizes round up") {
        CHECK(degrade(Tensor::full({1, 3, 17, 10}, 0.2f), DegradationSpec{}).shape() == Shape{1, 3, 5, 3});
    }
    SUBCASE("output is clamped to [0,1]") {
        Tensor img({1, 1, 16, 16});
        for (std::int64_t y = 0; y < 16; ++y)
            for (std::int64_t x = 0; x < 16; ++x) img.at(0, 0, y, x) = ((x / 2 + y / 2) % 2) ? 1.0f : 0.0f;
        const Tensor lr = degrade(img, DegradationSpec{});
        for (float v : lr.data()) CHECK((v >= 0.0f && v <= 1.0f));
    }
    SUBCASE("qp without a codec is reported") {
        DegradationSpec spec;
        spec.qp = 31;
        CHECK_THROWS_AS(degrade(Tensor::full({1, 3, 8, 8}, 0.5f), spec), CodecUnavailable);
    }
    SUBCASE("qp outside the challenge set is refused") {
        DegradationSpec spec;
        spec.qp = 30;
        CHECK_THROWS_AS(degrade(Tensor::full({1, 3, 8, 8}, 0.5f), spec), UsageError);
    }
}

TEST_CASE("nearest upsample") {
    SUBCASE("r = 1 is the identity") {
        const Tensor img = random_tensor({1, 3, 5, 6}, 2);
        CHECK(max_abs_diff(nearest_upsample(img, 1), img) == 0.0f);
    }
    SUBCASE("single pixel fills a block") {
        const Tensor out = nearest_upsample(Tensor::full({1, 1, 1, 1}, 0.3f), 4);
        CHECK(out.shape() == Shape{1, 1, 4, 4});
        for (float v : out.data()) CHECK(v == 0.3f);
    }
    SUBCASE("equals channel repeat followed by pixel shuffle") {
        for (int r : {2, 3, 4}) {
            const Tensor img = random_tensor({2, 3, 5, 4}, 100 + r);
            CHECK(max_abs_diff(nearest_upsample(img, r), pixel_shuffle(repeat_channels(img, r * r), r)) == 0.0f);
        }
    }
    CHECK_THROWS_AS(nearest_upsample(Tensor::full({1, 1, 2, 2}, 0.0f), 0), ShapeError);
}

TEST_CASE("baseline upsample uses lanczos-3 at the requested scale") {
    const Tensor lr = random_tensor({1, 3, 6, 5}, 9, 0.0f, 1.0f);
    const Tensor up = baseline_upsample(lr, 4);
    CHECK(up.shape() == Shape{1, 3, 24, 20});
    CHECK(max_abs_diff(up, resample_oracle(lr, 24, 20, 3)) <= 1e-6f);
}

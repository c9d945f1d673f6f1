#include <cmath>
#include <limits>

#include "doctest.h"
#include "metric_oracles.hpp"
#include "rtsr/errors.hpp"
#include "rtsr/metrics.hpp"
#include "published_results.hpp"
#include "test_util.hpp"

using namespace rtsr;
using namespace rtsr::testing;

TEST_CASE("luma") {
    auto y_of = [](float r, float g, float b) {
        return to_luma(Tensor({1, 3, 1, 1}, std::vector<float>{r, g, b})).data()[0];
    };
    CHECK(y_of(0, 0, 0) == doctest::Approx(16.0 / 255).epsilon(1e-6));
    CHECK(y_of(1, 1, 1) == doctest::Approx(235.0 / 255).epsilon(1e-6));
    CHECK(y_of(0, 1, 0) == doctest::Approx((16.0 + 128.553) / 255).epsilon(1e-6));
    CHECK(y_of(1, 0, 0) == doctest::Approx((16.0 + 65.481) / 255).epsilon(1e-6));
    CHECK(to_luma(Tensor({2, 3, 4, 5})).shape() == Shape{2, 1, 4, 5});
    CHECK_THROWS_AS(to_luma(Tensor({1, 1, 4, 4})), ShapeError);
}

TEST_CASE("psnr") {
    const Tensor a = random_tensor({1, 3, 8, 8}, 1, 0.0f, 1.0f);
    CHECK(psnr(a, a) == std::numeric_limits<double>::infinity());

    Tensor lo = Tensor::full({1, 3, 8, 8}, 0.25f), hi = lo;
    for (float& v : hi.data()) v += 1.0f / 255.0f;
    CHECK(psnr(lo, hi) == doctest::Approx(20.0 * std::log10(255.0)).epsilon(1e-6));
    CHECK(std::abs(psnr(lo, hi) - 48.1308) < 1e-3);

    for (std::uint64_t seed = 2; seed < 12; ++seed) {
        const Tensor x = random_tensor({1, 3, 8, 8}, seed, -0.1f, 1.1f);
        const Tensor y = random_tensor({1, 3, 8, 8}, seed + 100, 0.0f, 1.0f);
        CHECK(std::abs(psnr(x, y) - psnr_oracle(x, y)) <= 1e-6);
        CHECK(psnr(x, y) == psnr(y, x));
    }
    const Tensor x = random_tensor({1, 3, 8, 8}, 5, 0.0f, 255.0f), y = random_tensor({1, 3, 8, 8}, 6, 0.0f, 255.0f);
    CHECK(std::abs(psnr(x, y, 255.0) - psnr_oracle(x, y, 255.0)) <= 1e-6);
    CHECK_THROWS_AS(psnr(a, Tensor({1, 3, 8, 7})), ShapeError);
}

TEST_CASE("ssim") {
    SUBCASE("self similarity is exactly one") {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const Tensor a = random_tensor({1, 3, 16, 13}, seed, 0.0f, 1.0f);
            CHECK(ssim(a, a) == 1.0);
        }
    }
    SUBCASE("constant images reduce to the luminance term") {
        const double c1 = 0.3, c2 = 0.7, k1 = 1e-4;
        const double expect = (2 * c1 * c2 + k1) / (c1 * c1 + c2 * c2 + k1);
        CHECK(ssim(Tensor::full({1, 1, 12, 12}, 0.3f), Tensor::full({1, 1, 12, 12}, 0.7f)) ==
              doctest::Approx(expect).epsilon(1e-6));
    }
    SUBCASE("matches per-window brute force") {
        for (std::uint64_t seed = 0; seed < 6; ++seed) {
            const Tensor a = random_tensor({1, 3, 16, 16}, 200 + seed, 0.0f, 1.0f);
            Tensor b = a;
            const Tensor noise = random_tensor(a.shape(), 300 + seed, -0.2f, 0.2f);
            for (std::size_t i = 0; i < b.data().size(); ++i) b.data()[i] += noise.data()[i] * (seed % 3);
            CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) <= 1e-6);
            CHECK(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-9);
            CHECK(ssim(a, b) <= 1.0);
            CHECK(ssim(a, b) >= -1.0);
        }
        const Tensor a = random_tensor({2, 2, 20, 14}, 9, 0.0f, 1.0f), b = random_tensor({2, 2, 20, 14}, 10, 0.0f, 1.0f);
        CHECK(std::abs(ssim(a, b) - ssim_oracle(a, b)) <= 1e-6);
    }
    SUBCASE("image smaller than the window") {
        CHECK_THROWS_AS(ssim(Tensor({1, 3, 10, 16}), Tensor({1, 3, 10, 16})), ShapeError);
    }
}

TEST_CASE("evaluate_pair") {
    const Tensor hr = random_tensor({1, 3, 16, 16}, 40, 0.0f, 1.0f);
    const Tensor sr = random_tensor({1, 3, 16, 16}, 41, -0.2f, 1.2f);
    Tensor clamped = sr;
    for (float& v : clamped.data()) v = std::clamp(v, 0.0f, 1.0f);
    const ImageMetrics m = evaluate_pair(sr, hr);
    CHECK(m.psnr_rgb == doctest::Approx(psnr_oracle(clamped, hr)).epsilon(1e-12));
    CHECK(m.psnr_y == doctest::Approx(psnr_oracle(to_luma(clamped), to_luma(hr))).epsilon(1e-12));
    CHECK(m.ssim_rgb == doctest::Approx(ssim_oracle(clamped, hr)).epsilon(1e-9));
    CHECK(m.ssim_y == doctest::Approx(ssim_oracle(to_luma(clamped), to_luma(hr))).epsilon(1e-9));
}

TEST_CASE("delta psnr") {
    const QpPair base{kBaselinePsnrYQp31, kBaselinePsnrYQp63};
    CHECK(delta_psnr({33.11, 29.17}, base) == doctest::Approx(0.205).epsilon(1e-9));
    CHECK(delta_psnr({33.93, 29.41}, base) == doctest::Approx(0.735).epsilon(1e-9));
    CHECK(delta_psnr(base, base) == 0.0);
    for (const auto& row : kPublishedResults) {
        CAPTURE(row.team);
        CHECK(std::abs(delta_psnr({row.psnr_y_qp31, row.psnr_y_qp63}, base) - row.delta) <= 0.0051);
    }
}

TEST_CASE("challenge score") {
    CHECK(std::abs(challenge_score({0.205, 0.468, 0.1}) - 33.70) <= 0.05);
    CHECK(challenge_score({0.0, 1.0, 0.1}) == 20.0);
    CHECK(std::abs(challenge_score({0.355, 0.685, 0.1}) - 30.91) <= 0.05);
    for (const auto& row : kPublishedResults) {
        CAPTURE(row.team);
        CHECK(std::abs(challenge_score({row.delta, row.runtime_ms, 0.1}) - row.score) <= 0.05);
    }
    double prev = 0.0;
    for (double d = -1.0; d <= 1.0; d += 0.1) {
        const double s = challenge_score({d, 0.7, 0.1});
        CHECK(s > prev);
        prev = s;
    }
    prev = std::numeric_limits<double>::infinity();
    for (double t = 0.1; t <= 10.0; t += 0.3) {
        const double s = challenge_score({0.3, t, 0.1});
        CHECK(s < prev);
        prev = s;
    }
    CHECK_THROWS_AS(challenge_score({0.1, 0.0, 0.1}), UsageError);
    CHECK_THROWS_AS(challenge_score({0.1, -1.0, 0.1}), UsageError);
    CHECK_THROWS_AS(challenge_score({0.1, 1.0, 0.0}), UsageError);
}

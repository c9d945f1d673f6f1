#include "rtsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rtsr/errors.hpp"

namespace rtsr {

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                         " differ");
    }
    if (a.empty()) throw ShapeError(std::string(what) + ": empty images");
}

void require_peak(double peak) {
    if (!(peak > 0.0) || !std::isfinite(peak)) throw UsageError("peak must be positive");
}

std::vector<double> gaussian_taps() {
    std::vector<double> g(kSsimWindow);
    const int half = kSsimWindow / 2;
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - half;
        g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += g[static_cast<std::size_t>(i)];
    }
    for (double& v : g) v /= sum;
    return g;
}

// Valid-mode separable filtering of an h x w plane.
std::vector<double> blur_valid(const std::vector<double>& src, std::int64_t h, std::int64_t w,
                               const std::vector<double>& g) {
    const std::int64_t k = kSsimWindow;
    const std::int64_t ow = w - k + 1;
    const std::int64_t oh = h - k + 1;
    std::vector<double> rows(static_cast<std::size_t>(h * ow));
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::int64_t t = 0; t < k; ++t) acc += g[static_cast<std::size_t>(t)] * src[static_cast<std::size_t>(y * w + x + t)];
            rows[static_cast<std::size_t>(y * ow + x)] = acc;
        }
    std::vector<double> out(static_cast<std::size_t>(oh * ow));
    for (std::int64_t y = 0; y < oh; ++y)
        for (std::int64_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::int64_t t = 0; t < k; ++t) acc += g[static_cast<std::size_t>(t)] * rows[static_cast<std::size_t>((y + t) * ow + x)];
            out[static_cast<std::size_t>(y * ow + x)] = acc;
        }
    return out;
}

double ssim_plane(const float* pa, const float* pb, std::int64_t h, std::int64_t w, double peak,
                  const std::vector<double>& g) {
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    const auto n = static_cast<std::size_t>(h * w);
    std::vector<double> a(n), b(n), aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = pa[i];
        b[i] = pb[i];
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    const auto ma = blur_valid(a, h, w, g);
    const auto mb = blur_valid(b, h, w, g);
    const auto saa = blur_valid(aa, h, w, g);
    const auto sbb = blur_valid(bb, h, w, g);
    const auto sab = blur_valid(ab, h, w, g);
    double acc = 0.0;
    for (std::size_t i = 0; i < ma.size(); ++i) {
        const double va = saa[i] - ma[i] * ma[i];
        const double vb = sbb[i] - mb[i] * mb[i];
        const double cov = sab[i] - ma[i] * mb[i];
        acc += ((2.0 * ma[i] * mb[i] + c1) * (2.0 * cov + c2)) /
               ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
    }
    return acc / static_cast<double>(ma.size());
}

}  // namespace

Tensor to_luma(const Tensor& img) {
    const Shape& s = img.shape();
    if (s.c != 3) throw ShapeError("luma conversion needs 3 channels, got " + to_string(s));
    Tensor out({s.n, 1, s.h, s.w});
    for (std::int64_t n = 0; n < s.n; ++n) {
        const float* r = img.plane(n, 0);
        const float* g = img.plane(n, 1);
        const float* b = img.plane(n, 2);
        float* y = out.plane(n, 0);
        for (std::int64_t i = 0; i < s.plane(); ++i) {
            y[i] = static_cast<float>((16.0 + 65.481 * r[i] + 128.553 * g[i] + 24.966 * b[i]) / 255.0);
        }
    }
    return out;
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
    require_same(a, b, "psnr");
    require_peak(peak);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double x = std::clamp(static_cast<double>(a.data()[i]), 0.0, peak);
        const double y = std::clamp(static_cast<double>(b.data()[i]), 0.0, peak);
        acc += (x - y) * (x - y);
    }
    const double mse = acc / static_cast<double>(a.numel());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Tensor& a, const Tensor& b, double peak) {
    require_same(a, b, "ssim");
    require_peak(peak);
    const Shape& s = a.shape();
    if (s.h < kSsimWindow || s.w < kSsimWindow) {
        throw ShapeError("ssim needs images of at least " + std::to_string(kSsimWindow) + "x" +
                         std::to_string(kSsimWindow) + ", got " + to_string(s));
    }
    const auto g = gaussian_taps();
    double acc = 0.0;
    for (std::int64_t n = 0; n < s.n; ++n)
        for (std::int64_t c = 0; c < s.c; ++c) acc += ssim_plane(a.plane(n, c), b.plane(n, c), s.h, s.w, peak, g);
    return acc / static_cast<double>(s.n * s.c);
}

ImageMetrics evaluate_pair(const Tensor& sr, const Tensor& hr) {
    require_same(sr, hr, "evaluate");
    Tensor sc(sr.shape());
    Tensor hc(hr.shape());
    for (std::size_t i = 0; i < sc.data().size(); ++i) {
        sc.data()[i] = std::clamp(sr.data()[i], 0.0f, 1.0f);
        hc.data()[i] = std::clamp(hr.data()[i], 0.0f, 1.0f);
    }
    const Tensor sy = to_luma(sc);
    const Tensor hy = to_luma(hc);
    return {psnr(sc, hc), psnr(sy, hy), ssim(sc, hc), ssim(sy, hy)};
}

double delta_psnr(const QpPair& m, const QpPair& b) { return (m.qp31 + m.qp63) / 2.0 - (b.qp31 + b.qp63) / 2.0; }

double challenge_score(const ScoreInputs& in) {
    if (!(in.runtime_ms > 0.0) || !std::isfinite(in.runtime_ms)) throw UsageError("runtime must be positive");
    if (!(in.c > 0.0) || !std::isfinite(in.c)) throw UsageError("scaling constant C must be positive");
    return 2.0 * std::pow(2.0, in.delta_db) / (std::sqrt(in.runtime_ms) * in.c);
}

}  // namespace rtsr

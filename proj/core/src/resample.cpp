#include "rtsr/resample.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "rtsr/errors.hpp"

namespace rtsr {

namespace {

double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

double catmull_rom(double x) {
    x = std::fabs(x);
    if (x < 1.0) return 1.5 * x * x * x - 2.5 * x * x + 1.0;
    if (x < 2.0) return -0.5 * x * x * x + 2.5 * x * x - 4.0 * x + 2.0;
    return 0.0;
}

struct Tap {
    std::int64_t first = 0;  // clamped source indices are first..first+weights.size()-1 before clamping
    std::vector<double> weights;
};

// One row of normalised weights per output index.
std::vector<Tap> build_taps(std::int64_t in, std::int64_t out, const ResampleKernel& kernel) {
    std::vector<Tap> taps(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    if (kernel.kind == ResampleKind::nearest) {
        for (std::int64_t d = 0; d < out; ++d) {
            auto src = static_cast<std::int64_t>(std::floor((static_cast<double>(d) + 0.5) * scale));
            taps[static_cast<std::size_t>(d)] = {std::clamp<std::int64_t>(src, 0, in - 1), {1.0}};
        }
        return taps;
    }
    const double stretch = std::max(1.0, scale);
    const double support = kernel.support() * stretch;
    for (std::int64_t d = 0; d < out; ++d) {
        const double center = (static_cast<double>(d) + 0.5) * scale - 0.5;
        const auto lo = static_cast<std::int64_t>(std::floor(center - support)) + 1;
        const auto hi = static_cast<std::int64_t>(std::ceil(center + support)) - 1;
        Tap tap;
        tap.first = lo;
        double sum = 0.0;
        for (std::int64_t s = lo; s <= hi; ++s) {
            const double w = kernel.weight((static_cast<double>(s) - center) / stretch);
            tap.weights.push_back(w);
            sum += w;
        }
        if (sum != 0.0) {
            for (double& w : tap.weights) w /= sum;
        }
        taps[static_cast<std::size_t>(d)] = std::move(tap);
    }
    return taps;
}

}  // namespace

double ResampleKernel::support() const {
    switch (kind) {
        case ResampleKind::lanczos: return static_cast<double>(a);
        case ResampleKind::bicubic_catmull_rom: return 2.0;
        case ResampleKind::nearest: return 0.5;
    }
    return 1.0;
}

double ResampleKernel::weight(double x) const {
    switch (kind) {
        case ResampleKind::lanczos: return lanczos_weight(x, a);
        case ResampleKind::bicubic_catmull_rom: return catmull_rom(x);
        case ResampleKind::nearest: return (x >= -0.5 && x < 0.5) ? 1.0 : 0.0;
    }
    return 0.0;
}

bool is_challenge_qp(int qp) {
    return std::find(std::begin(kChallengeQps), std::end(kChallengeQps), qp) != std::end(kChallengeQps);
}

double lanczos_weight(double x, int a) {
    if (a < 1) throw UsageError("lanczos window must be >= 1");
    if (std::fabs(x) >= static_cast<double>(a)) return 0.0;
    // sin(pi * k) is not exactly zero in floating point for integer k != 0.
    if (x != 0.0 && x == std::round(x)) return 0.0;
    return sinc(x) * sinc(x / a);
}

Tensor resample_image(const Tensor& img, std::int64_t out_h, std::int64_t out_w, const ResampleKernel& kernel) {
    const Shape& s = img.shape();
    if (out_h < 1 || out_w < 1) {
        throw ShapeError("resample to empty size " + std::to_string(out_h) + "x" + std::to_string(out_w));
    }
    if (s.h < 1 || s.w < 1) throw ShapeError("resample of empty image " + to_string(s));
    if (kernel.kind == ResampleKind::lanczos && kernel.a < 1) throw UsageError("lanczos window must be >= 1");

    const auto htaps = build_taps(s.w, out_w, kernel);
    const auto vtaps = build_taps(s.h, out_h, kernel);

    // Horizontal pass into a double buffer, then vertical pass.
    std::vector<double> mid(static_cast<std::size_t>(s.h * out_w));
    Tensor out({s.n, s.c, out_h, out_w});
    for (std::int64_t n = 0; n < s.n; ++n) {
        for (std::int64_t c = 0; c < s.c; ++c) {
            const float* src = img.plane(n, c);
            for (std::int64_t y = 0; y < s.h; ++y) {
                for (std::int64_t x = 0; x < out_w; ++x) {
                    const Tap& t = htaps[static_cast<std::size_t>(x)];
                    double acc = 0.0;
                    for (std::size_t k = 0; k < t.weights.size(); ++k) {
                        const auto sx = std::clamp<std::int64_t>(t.first + static_cast<std::int64_t>(k), 0, s.w - 1);
                        acc += t.weights[k] * src[y * s.w + sx];
                    }
                    mid[static_cast<std::size_t>(y * out_w + x)] = acc;
                }
            }
            float* dst = out.plane(n, c);
            for (std::int64_t y = 0; y < out_h; ++y) {
                const Tap& t = vtaps[static_cast<std::size_t>(y)];
                for (std::int64_t x = 0; x < out_w; ++x) {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < t.weights.size(); ++k) {
                        const auto sy = std::clamp<std::int64_t>(t.first + static_cast<std::int64_t>(k), 0, s.h - 1);
                        acc += t.weights[k] * mid[static_cast<std::size_t>(sy * out_w + x)];
                    }
                    dst[y * out_w + x] = static_cast<float>(acc);
                }
            }
        }
    }
    return out;
}

Tensor degrade(const Tensor& img, const DegradationSpec& spec, ImageCodec* codec) {
    if (spec.scale < 1) throw UsageError("degradation scale must be >= 1");
    if (spec.qp && !is_challenge_qp(*spec.qp)) {
        throw UsageError("qp " + std::to_string(*spec.qp) + " is not one of 31,39,47,55,63");
    }
    const Shape& s = img.shape();
    const std::int64_t oh = (s.h + spec.scale - 1) / spec.scale;
    const std::int64_t ow = (s.w + spec.scale - 1) / spec.scale;
    Tensor lr = (spec.scale == 1) ? img : resample_image(img, oh, ow, spec.kernel);
    if (spec.qp) {
        if (codec == nullptr) throw CodecUnavailable("codec unavailable for qp " + std::to_string(*spec.qp));
        lr = codec->roundtrip(lr, *spec.qp);
    }
    for (float& v : lr.data()) v = std::clamp(v, 0.0f, 1.0f);
    return lr;
}

Tensor nearest_upsample(const Tensor& img, int r) {
    if (r < 1) throw ShapeError("nearest_upsample factor must be positive");
    const Shape& s = img.shape();
    Tensor out({s.n, s.c, s.h * r, s.w * r});
    for (std::int64_t n = 0; n < s.n; ++n)
        for (std::int64_t c = 0; c < s.c; ++c)
            for (std::int64_t y = 0; y < s.h * r; ++y)
                for (std::int64_t x = 0; x < s.w * r; ++x) out.at(n, c, y, x) = img.at(n, c, y / r, x / r);
    return out;
}

Tensor baseline_upsample(const Tensor& lr, int scale) {
    const Shape& s = lr.shape();
    return resample_image(lr, s.h * scale, s.w * scale, ResampleKernel::lanczos(kBaselineLanczosWindow));
}

}  // namespace rtsr

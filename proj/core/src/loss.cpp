#include "rtsr/loss.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "rtsr/errors.hpp"
#include "rtsr/ops.hpp"
#include "rtsr/reparam.hpp"
#include "rtsr/resample.hpp"

namespace rtsr {

namespace {

constexpr double kGradientEps = 1e-8;

void require_same(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                         " differ");
    }
    if (a.empty()) throw ShapeError(std::string(what) + ": empty tensors");
}

float sign(double v) { return v > 0.0 ? 1.0f : (v < 0.0 ? -1.0f : 0.0f); }

using Complex = std::complex<double>;

std::vector<Complex> twiddles(std::int64_t n, double direction) {
    std::vector<Complex> t(static_cast<std::size_t>(n));
    for (std::int64_t k = 0; k < n; ++k) {
        const double ang = direction * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
        t[static_cast<std::size_t>(k)] = {std::cos(ang), std::sin(ang)};
    }
    return t;
}

// Unnormalised 2-D DFT of an h x w plane by rows then columns.
std::vector<Complex> dft2(const std::vector<Complex>& in, std::int64_t h, std::int64_t w, double direction) {
    const auto tw = twiddles(w, direction);
    const auto th = twiddles(h, direction);
    std::vector<Complex> rows(in.size());
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t k = 0; k < w; ++k) {
            Complex acc = 0.0;
            for (std::int64_t x = 0; x < w; ++x) acc += in[static_cast<std::size_t>(y * w + x)] * tw[static_cast<std::size_t>((k * x) % w)];
            rows[static_cast<std::size_t>(y * w + k)] = acc;
        }
    std::vector<Complex> out(in.size());
    for (std::int64_t k = 0; k < h; ++k)
        for (std::int64_t x = 0; x < w; ++x) {
            Complex acc = 0.0;
            for (std::int64_t y = 0; y < h; ++y) acc += rows[static_cast<std::size_t>(y * w + x)] * th[static_cast<std::size_t>((k * y) % h)];
            out[static_cast<std::size_t>(k * w + x)] = acc;
        }
    return out;
}

ConvParams sobel(FixedFilterKind kind, std::int64_t channels) {
    ConvParams p = ConvParams::make(channels, channels, 3, false, 1, static_cast<int>(channels));
    const auto st = fixed_stencil(kind);
    for (std::int64_t c = 0; c < channels; ++c)
        for (std::size_t k = 0; k < 9; ++k) p.weight.data()[static_cast<std::size_t>(c) * 9 + k] = st[k];
    return p;
}

}  // namespace

void LossConfig::validate() const {
    const double w[] = {l1, gradient_map, fft_l1, mse, distill_mse, aux_x2};
    bool any = false;
    for (double v : w) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw UsageError("loss weights must be finite and non-negative");
        any = any || v > 0.0;
    }
    if (!any) throw UsageError("at least one loss weight must be positive");
}

TermValue l1_loss(const Tensor& a, const Tensor& b) {
    require_same(a, b, "l1 loss");
    const auto n = static_cast<double>(a.numel());
    TermValue out{0.0, Tensor(a.shape())};
    auto g = out.grad.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double d = static_cast<double>(a.data()[i]) - b.data()[i];
        acc += std::abs(d);
        g[i] = static_cast<float>(sign(d) / n);
    }
    out.value = acc / n;
    return out;
}

TermValue mse_loss(const Tensor& a, const Tensor& b) {
    require_same(a, b, "mse loss");
    const auto n = static_cast<double>(a.numel());
    TermValue out{0.0, Tensor(a.shape())};
    auto g = out.grad.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double d = static_cast<double>(a.data()[i]) - b.data()[i];
        acc += d * d;
        g[i] = static_cast<float>(2.0 * d / n);
    }
    out.value = acc / n;
    return out;
}

TermValue fft_l1_loss(const Tensor& a, const Tensor& b) {
    require_same(a, b, "fft loss");
    const Shape& s = a.shape();
    const double norm = 2.0 * static_cast<double>(a.numel());
    TermValue out{0.0, Tensor(s)};
    double acc = 0.0;
    std::vector<Complex> diff(static_cast<std::size_t>(s.plane()));
    for (std::int64_t n = 0; n < s.n; ++n)
        for (std::int64_t c = 0; c < s.c; ++c) {
            const float* pa = a.plane(n, c);
            const float* pb = b.plane(n, c);
            for (std::int64_t i = 0; i < s.plane(); ++i) diff[static_cast<std::size_t>(i)] = static_cast<double>(pa[i]) - pb[i];
            const auto f = dft2(diff, s.h, s.w, -1.0);
            std::vector<Complex> g(f.size());
            for (std::size_t k = 0; k < f.size(); ++k) {
                acc += std::abs(f[k].real()) + std::abs(f[k].imag());
                g[k] = {sign(f[k].real()) / norm, sign(f[k].imag()) / norm};
            }
            // The loss is linear in the difference before the abs, so the adjoint is
            // the conjugate transform of the sign pattern.
            const auto back = dft2(g, s.h, s.w, +1.0);
            float* dst = out.grad.plane(n, c);
            for (std::int64_t i = 0; i < s.plane(); ++i) dst[i] = static_cast<float>(back[static_cast<std::size_t>(i)].real());
        }
    out.value = acc / norm;
    return out;
}

namespace {

struct SobelMaps {
    std::vector<double> gx;
    std::vector<double> gy;
    std::vector<double> mag;
};

// Zero-padded Sobel responses and magnitudes, evaluated in double.
SobelMaps sobel_maps(const Tensor& img) {
    const Shape& s = img.shape();
    const auto kx = fixed_stencil(FixedFilterKind::sobel_x);
    const auto ky = fixed_stencil(FixedFilterKind::sobel_y);
    const auto n = static_cast<std::size_t>(img.numel());
    SobelMaps m{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
    std::size_t i = 0;
    for (std::int64_t b = 0; b < s.n; ++b)
        for (std::int64_t c = 0; c < s.c; ++c) {
            const float* src = img.plane(b, c);
            for (std::int64_t y = 0; y < s.h; ++y)
                for (std::int64_t x = 0; x < s.w; ++x, ++i) {
                    double gx = 0.0, gy = 0.0;
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            const auto sy = y + dy, sx = x + dx;
                            if (sy < 0 || sx < 0 || sy >= s.h || sx >= s.w) continue;
                            const double v = src[sy * s.w + sx];
                            const auto k = static_cast<std::size_t>((dy + 1) * 3 + dx + 1);
                            gx += kx[k] * v;
                            gy += ky[k] * v;
                        }
                    m.gx[i] = gx;
                    m.gy[i] = gy;
                    m.mag[i] = std::sqrt(gx * gx + gy * gy + kGradientEps);
                }
        }
    return m;
}

}  // namespace

Tensor gradient_magnitude(const Tensor& img) {
    const SobelMaps m = sobel_maps(img);
    Tensor out(img.shape());
    for (std::size_t i = 0; i < m.mag.size(); ++i) out.data()[i] = static_cast<float>(m.mag[i]);
    return out;
}

TermValue gradient_map_loss(const Tensor& a, const Tensor& b) {
    require_same(a, b, "gradient-map loss");
    const auto c = a.shape().c;
    const ConvParams sx = sobel(FixedFilterKind::sobel_x, c);
    const ConvParams sy = sobel(FixedFilterKind::sobel_y, c);
    const SobelMaps ma = sobel_maps(a);
    const SobelMaps mb = sobel_maps(b);
    const auto n = static_cast<double>(a.numel());
    Tensor ux(a.shape());
    Tensor uy(a.shape());
    double acc = 0.0;
    for (std::size_t i = 0; i < ux.data().size(); ++i) {
        const double m = ma.mag[i];
        const double d = m - mb.mag[i];
        acc += std::abs(d);
        const double u = sign(d) / n / m;
        ux.data()[i] = static_cast<float>(u * ma.gx[i]);
        uy.data()[i] = static_cast<float>(u * ma.gy[i]);
    }
    TermValue out{acc / n, add(conv2d_backward_input(ux, sx, 1, a.shape()), conv2d_backward_input(uy, sy, 1, a.shape()))};
    return out;
}

Tensor half_resolution(const Tensor& hr) {
    const Shape& s = hr.shape();
    return resample_image(hr, (s.h + 1) / 2, (s.w + 1) / 2, ResampleKernel::lanczos(kBaselineLanczosWindow));
}

LossResult loss_eval(const Tensor& sr, const Tensor& hr, const LossConfig& cfg, const LossExtras& extras) {
    cfg.validate();
    require_same(sr, hr, "loss");
    LossResult out;
    out.grad_sr = Tensor(sr.shape());
    auto add_term = [&](const char* name, double weight, const TermValue& t, Tensor& grad) {
        out.terms[name] = t.value;
        out.total += weight * t.value;
        auto dst = grad.data();
        auto src = t.grad.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += static_cast<float>(weight) * src[i];
    };
    if (cfg.l1 > 0) add_term("l1", cfg.l1, l1_loss(sr, hr), out.grad_sr);
    if (cfg.mse > 0) add_term("mse", cfg.mse, mse_loss(sr, hr), out.grad_sr);
    if (cfg.gradient_map > 0) add_term("gradient_map", cfg.gradient_map, gradient_map_loss(sr, hr), out.grad_sr);
    if (cfg.fft_l1 > 0) add_term("fft_l1", cfg.fft_l1, fft_l1_loss(sr, hr), out.grad_sr);
    if (cfg.distill_mse > 0) {
        if (extras.teacher_sr == nullptr) throw UsageError("distillation weight set but no teacher output given");
        add_term("distill_mse", cfg.distill_mse, mse_loss(sr, *extras.teacher_sr), out.grad_sr);
    }
    if (cfg.aux_x2 > 0) {
        if (extras.aux_sr2 == nullptr || extras.hr2 == nullptr) {
            throw UsageError("aux_x2 weight set but the x2 output or target is missing");
        }
        out.grad_aux = Tensor(extras.aux_sr2->shape());
        add_term("aux_x2", cfg.aux_x2, l1_loss(*extras.aux_sr2, *extras.hr2), *out.grad_aux);
    }
    return out;
}

}  // namespace rtsr

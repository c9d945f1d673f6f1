#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rtsr/autograd.hpp"
#include "rtsr/loss.hpp"
#include "test_util.hpp"

namespace rtsr::testing {

/// Analytic vs central-difference derivative over random coordinates. The step is
/// measured after float rounding of the perturbed value. Relative error uses
/// max(|analytic|, |numeric|, floor * max|gradient|) as the denominator.
struct GradCheckResult {
    double max_rel = 0.0;
    int points = 0;
    std::string worst;
};

inline double rel_error(double analytic, double numeric, double floor) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline GradCheckResult check_gradient(std::span<float> values, std::span<const float> analytic,
                                      const std::function<double()>& objective, int points, double h,
                                      std::uint64_t seed, double floor = 1e-3) {
    GradCheckResult r;
    double scale = 0.0;
    for (float g : analytic) scale = std::max(scale, static_cast<double>(std::abs(g)));
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    for (int k = 0; k < points; ++k) {
        const std::size_t i = pick(rng);
        const float orig = values[i];
        const float up = static_cast<float>(orig + h);
        const float down = static_cast<float>(orig - h);
        values[i] = up;
        const double fp = objective();
        values[i] = down;
        const double fm = objective();
        values[i] = orig;
        const double numeric = (fp - fm) / (static_cast<double>(up) - static_cast<double>(down));
        const double a = analytic.empty() ? 0.0 : analytic[i];
        const double e = rel_error(a, numeric, floor * scale + 1e-300);
        if (e >= r.max_rel) {
            r.max_rel = e;
            r.worst = "index " + std::to_string(i) + ": analytic " + std::to_string(a) + " numeric " +
                      std::to_string(numeric);
        }
        ++r.points;
    }
    return r;
}

/// Plain double-precision NCHW buffer for reference forwards.
struct DTensor {
    Shape shape;
    std::vector<double> v;

    explicit DTensor(Shape s) : shape(s), v(static_cast<std::size_t>(s.n * s.c * s.h * s.w), 0.0) {}
    explicit DTensor(const Tensor& t) : shape(t.shape()), v(t.data().begin(), t.data().end()) {}
    double& at(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) {
        return v[static_cast<std::size_t>(((n * shape.c + c) * shape.h + y) * shape.w + x)];
    }
    double at(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) const {
        return v[static_cast<std::size_t>(((n * shape.c + c) * shape.h + y) * shape.w + x)];
    }
};

inline DTensor conv_ref(const DTensor& x, const ConvParams& p, int padding) {
    const Shape& s = x.shape;
    const auto oc = p.out_channels(), kh = p.kernel_h(), kw = p.kernel_w();
    const auto icg = p.weight.shape().c, ocg = oc / p.groups;
    const auto oh = (s.h + 2 * padding - kh) / p.stride + 1;
    const auto ow = (s.w + 2 * padding - kw) / p.stride + 1;
    DTensor out({s.n, oc, oh, ow});
    for (std::int64_t n = 0; n < s.n; ++n)
        for (std::int64_t o = 0; o < oc; ++o)
            for (std::int64_t y = 0; y < oh; ++y)
                for (std::int64_t q = 0; q < ow; ++q) {
                    double acc = p.bias ? (*p.bias)[static_cast<std::size_t>(o)] : 0.0;
                    for (std::int64_t ci = 0; ci < icg; ++ci)
                        for (std::int64_t dy = 0; dy < kh; ++dy)
                            for (std::int64_t dx = 0; dx < kw; ++dx) {
                                const auto iy = y * p.stride + dy - padding, ix = q * p.stride + dx - padding;
                                if (iy < 0 || ix < 0 || iy >= s.h || ix >= s.w) continue;
                                acc += static_cast<double>(p.weight.at(o, ci, dy, dx)) *
                                       x.at(n, (o / ocg) * icg + ci, iy, ix);
                            }
                    out.at(n, o, y, q) = acc;
                }
    return out;
}

inline double act_ref(double x, ActivationKind k) {
    switch (k) {
        case ActivationKind::relu: return x > 0.0 ? x : 0.0;
        case ActivationKind::gelu_tanh_approx:
            return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / 3.14159265358979323846) * (x + 0.044715 * x * x * x)));
        case ActivationKind::sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case ActivationKind::sigmoid_centered: return 1.0 / (1.0 + std::exp(-x)) - 0.5;
        case ActivationKind::identity: return x;
    }
    return x;
}

inline DTensor act_ref(DTensor x, ActivationKind k) {
    for (double& v : x.v) v = act_ref(v, k);
    return x;
}

/// Fixed random projection that turns a tensor output into a scalar.
struct Projection {
    Tensor weights;
    explicit Projection(const Shape& s, std::uint64_t seed) : weights(random_tensor(s, seed)) {}
    double operator()(const DTensor& y) const {
        double acc = 0.0;
        for (std::size_t i = 0; i < y.v.size(); ++i) acc += static_cast<double>(weights.data()[i]) * y.v[i];
        return acc;
    }
};

using TapeOp = std::function<Var(Tape&, Var)>;
using RefOp = std::function<DTensor(const Tensor&)>;

/// Gradient of <w, op(x)> with respect to x through the tape, checked by central
/// differences of the double-precision reference.
inline GradCheckResult check_tape_input(Tensor x, const TapeOp& op, const RefOp& ref, int points, double h,
                                        std::uint64_t seed) {
    Tape tape;
    const Var in = tape.leaf(x);
    const Var out = op(tape, in);
    const Projection proj(tape.value(out).shape(), seed);
    tape.backward(out, proj.weights);
    const Tensor g = tape.grad(in);
    return check_gradient(x.data(), g.data(), [&] { return proj(ref(x)); }, points, h, seed + 1);
}

enum class LossTerm { l1, mse, fft_l1, gradient_map, distill_mse, aux_x2 };

inline const char* loss_term_name(LossTerm t) {
    switch (t) {
        case LossTerm::l1: return "l1";
        case LossTerm::mse: return "mse";
        case LossTerm::fft_l1: return "fft_l1";
        case LossTerm::gradient_map: return "gradient_map";
        case LossTerm::distill_mse: return "distill_mse";
        case LossTerm::aux_x2: return "aux_x2";
    }
    return "";
}

/// Gradient of a single loss_eval term with respect to the output it supervises.
inline GradCheckResult check_loss_term(LossTerm term, int points, std::uint64_t seed) {
    LossConfig cfg{0, 0, 0, 0, 0, 0};
    Tensor sr = random_tensor({1, 3, 8, 8}, seed, 0.0f, 1.0f);
    const Tensor hr = random_tensor({1, 3, 8, 8}, seed + 1, 0.0f, 1.0f);
    const Tensor teacher = random_tensor({1, 3, 8, 8}, seed + 2, 0.0f, 1.0f);
    Tensor aux = random_tensor({1, 3, 4, 4}, seed + 3, 0.0f, 1.0f);
    const Tensor hr2 = random_tensor({1, 3, 4, 4}, seed + 4, 0.0f, 1.0f);
    switch (term) {
        case LossTerm::l1: cfg.l1 = 1; break;
        case LossTerm::mse: cfg.mse = 1; break;
        case LossTerm::fft_l1: cfg.fft_l1 = 1; break;
        case LossTerm::gradient_map: cfg.gradient_map = 1; break;
        case LossTerm::distill_mse: cfg.distill_mse = 1; break;
        case LossTerm::aux_x2: cfg.aux_x2 = 1; break;
    }
    const LossExtras extras{&teacher, &aux, &hr2};
    const LossResult res = loss_eval(sr, hr, cfg, extras);
    auto objective = [&] { return loss_eval(sr, hr, cfg, extras).total; };
    // Piecewise-linear terms stay exact for steps smaller than the distance to a kink.
    const double h = 1e-3;
    if (term == LossTerm::aux_x2) return check_gradient(aux.data(), res.grad_aux->data(), objective, points, h, seed);
    return check_gradient(sr.data(), res.grad_sr.data(), objective, points, h, seed);
}

}  // namespace rtsr::testing

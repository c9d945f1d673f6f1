#include "rtsr/autograd.hpp"

#include <algorithm>

#include "rtsr/detail/model_eval.hpp"
#include "rtsr/detail/tensor_exec.hpp"
#include "rtsr/errors.hpp"

namespace rtsr {

namespace {

ConvParams depthwise_stencil(FixedFilterKind kind, const std::vector<float>& scale) {
    const auto c = static_cast<std::int64_t>(scale.size());
    const auto stencil = fixed_stencil(kind);
    ConvParams p = ConvParams::make(c, c, 3, false, 1, static_cast<int>(c));
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (std::size_t k = 0; k < 9; ++k)
            p.weight.data()[static_cast<std::size_t>(ch) * 9 + k] = stencil[k] * scale[static_cast<std::size_t>(ch)];
    return p;
}

// Zero tensor of `shape` with channels [begin, begin + part.c) taken from `part`.
Tensor embed_channels(const Tensor& part, const Shape& shape, std::int64_t begin) {
    Tensor out(shape);
    const Shape& ps = part.shape();
    for (std::int64_t n = 0; n < ps.n; ++n)
        for (std::int64_t c = 0; c < ps.c; ++c) std::copy_n(part.plane(n, c), ps.plane(), out.plane(n, begin + c));
    return out;
}

}  // namespace

Var Tape::push(Tensor value, Backward back) {
    values_.push_back(std::move(value));
    backward_.push_back(std::move(back));
    return Var{static_cast<std::int32_t>(values_.size() - 1)};
}

Var Tape::leaf(Tensor value) { return push(std::move(value), nullptr); }

const Tensor& Tape::value(Var v) const {
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= values_.size()) throw UsageError("variable not on this tape");
    return values_[static_cast<std::size_t>(v.id)];
}

void Tape::accumulate(Var v, const Tensor& g) {
    auto& slot = grads_[static_cast<std::size_t>(v.id)];
    if (!slot) {
        slot = g;
        return;
    }
    auto dst = slot->data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::accumulate_param(const float* key, std::span<const float> g) {
    auto& buf = param_grads_[key];
    if (buf.empty()) buf.assign(g.size(), 0.0f);
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

Var Tape::conv(Var x, const ConvParams& p, int padding) {
    const Tensor& xv = value(x);
    return push(conv2d(xv, p, padding), [this, x, &p, padding](const Tensor& g) {
        const Tensor& in = value(x);
        accumulate(x, conv2d_backward_input(g, p, padding, in.shape()));
        const ConvGrads pg = conv2d_backward_params(in, g, p, padding);
        accumulate_param(p.weight.data().data(), pg.weight.data());
        if (p.bias) accumulate_param(p.bias->data(), pg.bias);
    });
}

Var Tape::fixed_filter(Var x, FixedFilterKind kind, const std::vector<float>& scale) {
    return push(detail::fixed_filter_valid(value(x), kind, scale), [this, x, kind, &scale](const Tensor& g) {
        const Tensor& in = value(x);
        const ConvParams p = depthwise_stencil(kind, scale);
        accumulate(x, conv2d_backward_input(g, p, 0, in.shape()));
        // d out / d scale[c] is the bare stencil response, so fold the weight gradient
        // back through the stencil taps.
        const ConvGrads pg = conv2d_backward_params(in, g, p, 0);
        const auto stencil = fixed_stencil(kind);
        std::vector<float> gs(scale.size(), 0.0f);
        for (std::size_t c = 0; c < scale.size(); ++c) {
            double acc = 0.0;
            for (std::size_t k = 0; k < 9; ++k) acc += static_cast<double>(stencil[k]) * pg.weight.data()[c * 9 + k];
            gs[c] = static_cast<float>(acc);
        }
        accumulate_param(scale.data(), gs);
    });
}

Var Tape::channel_scale(Var x, const std::vector<float>& scale) {
    return push(rtsr::channel_scale(value(x), scale), [this, x, &scale](const Tensor& g) {
        const Tensor& in = value(x);
        accumulate(x, rtsr::channel_scale(g, scale));
        const Shape& s = in.shape();
        std::vector<float> gs(scale.size(), 0.0f);
        for (std::int64_t c = 0; c < s.c; ++c) {
            double acc = 0.0;
            for (std::int64_t n = 0; n < s.n; ++n) {
                const float* a = in.plane(n, c);
                const float* b = g.plane(n, c);
                for (std::int64_t i = 0; i < s.plane(); ++i) acc += static_cast<double>(a[i]) * b[i];
            }
            gs[static_cast<std::size_t>(c)] = static_cast<float>(acc);
        }
        accumulate_param(scale.data(), gs);
    });
}

Var Tape::act(Var x, ActivationKind kind) {
    if (kind == ActivationKind::identity) return x;
    return push(activation_apply(value(x), kind), [this, x, kind](const Tensor& g) {
        const Tensor& in = value(x);
        Tensor gx(in.shape());
        auto dst = gx.data();
        auto src = in.data();
        auto gd = g.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = gd[i] * activation_derivative(src[i], kind);
        accumulate(x, gx);
    });
}

Var Tape::add(Var a, Var b) {
    return push(rtsr::add(value(a), value(b)), [this, a, b](const Tensor& g) {
        accumulate(a, g);
        accumulate(b, g);
    });
}

Var Tape::mul(Var a, Var b) {
    return push(rtsr::mul(value(a), value(b)), [this, a, b](const Tensor& g) {
        accumulate(a, rtsr::mul(g, value(b)));
        accumulate(b, rtsr::mul(g, value(a)));
    });
}

Var Tape::concat(const std::vector<Var>& parts) {
    std::vector<Tensor> vals;
    vals.reserve(parts.size());
    for (Var v : parts) vals.push_back(value(v));
    return push(concat_channels(vals), [this, parts](const Tensor& g) {
        std::int64_t begin = 0;
        for (Var v : parts) {
            const auto c = value(v).shape().c;
            accumulate(v, slice_channels(g, begin, begin + c));
            begin += c;
        }
    });
}

Var Tape::slice(Var x, std::int64_t begin, std::int64_t end) {
    return push(slice_channels(value(x), begin, end),
                [this, x, begin](const Tensor& g) { accumulate(x, embed_channels(g, value(x).shape(), begin)); });
}

Var Tape::pad(Var x, int p) {
    if (p == 0) return x;
    return push(pad_zero(value(x), p), [this, x, p](const Tensor& g) { accumulate(x, rtsr::crop(g, p)); });
}

Var Tape::crop(Var x, int p) {
    if (p == 0) return x;
    return push(rtsr::crop(value(x), p), [this, x, p](const Tensor& g) { accumulate(x, pad_zero(g, p)); });
}

Var Tape::shuffle(Var x, int r) {
    return push(pixel_shuffle(value(x), r), [this, x, r](const Tensor& g) { accumulate(x, pixel_unshuffle(g, r)); });
}

Var Tape::unshuffle(Var x, int r) {
    return push(pixel_unshuffle(value(x), r), [this, x, r](const Tensor& g) { accumulate(x, pixel_shuffle(g, r)); });
}

Var Tape::repeat(Var x, int times) {
    return push(repeat_channels(value(x), times), [this, x, times](const Tensor& g) {
        const Shape& s = value(x).shape();
        Tensor gx(s);
        for (std::int64_t n = 0; n < s.n; ++n)
            for (std::int64_t c = 0; c < s.c; ++c) {
                float* dst = gx.plane(n, c);
                for (int t = 0; t < times; ++t) {
                    const float* src = g.plane(n, c * times + t);
                    for (std::int64_t i = 0; i < s.plane(); ++i) dst[i] += src[i];
                }
            }
        accumulate(x, gx);
    });
}

void Tape::backward(Var out, const Tensor& seed) { backward({{out, seed}}); }

void Tape::backward(const std::vector<std::pair<Var, Tensor>>& seeds) {
    if (values_.empty()) throw UsageError("backward called before any forward was recorded");
    if (seeds.empty()) throw UsageError("backward needs at least one seed");
    grads_.assign(values_.size(), std::nullopt);
    param_grads_.clear();
    std::int32_t top = 0;
    for (const auto& [out, seed] : seeds) {
        const Tensor& ov = value(out);
        if (seed.shape() != ov.shape()) {
            throw ShapeError("backward seed " + to_string(seed.shape()) + " does not match output " +
                             to_string(ov.shape()));
        }
        accumulate(out, seed);
        top = std::max(top, out.id);
    }
    for (auto i = static_cast<std::int64_t>(top); i >= 0; --i) {
        const auto idx = static_cast<std::size_t>(i);
        if (!grads_[idx] || !backward_[idx]) continue;
        backward_[idx](*grads_[idx]);
    }
}

const Tensor& Tape::grad(Var v) const {
    value(v);
    const auto idx = static_cast<std::size_t>(v.id);
    if (idx >= grads_.size() || !grads_[idx]) throw UsageError("no gradient recorded for variable " + std::to_string(v.id));
    return *grads_[idx];
}

std::span<const float> Tape::param_grad(const float* storage) const {
    auto it = param_grads_.find(storage);
    if (it == param_grads_.end()) return {};
    return it->second;
}

void Tape::clear() {
    values_.clear();
    backward_.clear();
    grads_.clear();
    param_grads_.clear();
}

Var forward_on_tape(Tape& tape, const ModelGraph& g, Var input, std::optional<Var>* aux) {
    const Shape& s = tape.value(input).shape();
    if (s.c != 3) throw ShapeError("model input must have 3 channels, got " + to_string(s));
    const int m = input_multiple(g.spec);
    if (s.h % m != 0 || s.w % m != 0) {
        throw ShapeError("input " + to_string(s) + " not divisible by " + std::to_string(m) + " required by '" +
                         g.spec.name + "'");
    }
    detail::TapeExec ex{tape};
    return detail::eval_model(ex, g, input, aux);
}

}  // namespace rtsr

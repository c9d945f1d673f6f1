#include "rtsr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rtsr/errors.hpp"
#include "rtsr/parallel.hpp"

namespace rtsr {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

constexpr float kGeluC = 0.7978845608028654f;  // sqrt(2 / pi)
constexpr float kGeluA = 0.044715f;

float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

}  // namespace

ConvParams ConvParams::make(std::int64_t in, std::int64_t out, int k, bool with_bias, int stride,
                            int groups) {
    if (groups < 1 || in % groups != 0 || out % groups != 0) {
        throw ShapeError("conv channels " + std::to_string(in) + "->" + std::to_string(out) +
                         " not divisible by groups " + std::to_string(groups));
    }
    ConvParams p;
    p.weight = Tensor::zeros({out, in / groups, k, k});
    if (with_bias) p.bias = std::vector<float>(static_cast<std::size_t>(out), 0.0f);
    p.stride = stride;
    p.padding = (k - 1) / 2;
    p.groups = groups;
    return p;
}

std::string_view to_string(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::relu: return "relu";
        case ActivationKind::gelu_tanh_approx: return "gelu";
        case ActivationKind::sigmoid: return "sigmoid";
        case ActivationKind::identity: return "identity";
        case ActivationKind::sigmoid_centered: return "sigmoid_centered";
    }
    return "identity";
}

ActivationKind activation_from_string(std::string_view name) {
    if (name == "relu") return ActivationKind::relu;
    if (name == "gelu") return ActivationKind::gelu_tanh_approx;
    if (name == "sigmoid") return ActivationKind::sigmoid;
    if (name == "identity") return ActivationKind::identity;
    if (name == "sigmoid_centered") return ActivationKind::sigmoid_centered;
    throw DataError("unknown activation '" + std::string(name) + "'");
}

std::int64_t conv_out_extent(std::int64_t in, std::int64_t k, int stride, int padding) {
    const std::int64_t span = in + 2 * padding - k;
    if (span < 0) return 0;
    return span / stride + 1;
}

Tensor conv2d(const Tensor& input, const ConvParams& params) { return conv2d(input, params, params.padding); }

namespace {

struct ConvGeometry {
    Shape in;
    Shape w;
    std::int64_t oh = 0;
    std::int64_t ow = 0;
    std::int64_t out_per_group = 0;
    std::int64_t in_per_group = 0;
    int stride = 1;
    int padding = 0;
    int groups = 1;

    std::int64_t taps() const { return in_per_group * w.h * w.w; }
    bool pointwise() const { return w.h == 1 && w.w == 1 && stride == 1 && padding == 0; }
    // Output rows per im2col tile.
    std::int64_t tile_rows() const { return std::max<std::int64_t>(1, 4096 / std::max<std::int64_t>(ow, 1)); }
};

ConvGeometry conv_geometry(const Shape& in, const ConvParams& params, int padding) {
    const Shape& ws = params.weight.shape();
    if (params.stride < 1 || padding < 0 || params.groups < 1) {
        throw ShapeError("invalid conv geometry stride=" + std::to_string(params.stride) +
                         " padding=" + std::to_string(padding) + " groups=" + std::to_string(params.groups));
    }
    if (in.c != params.in_channels() || ws.n % params.groups != 0) {
        throw ShapeError("conv2d input " + to_string(in) + " incompatible with weight " + to_string(ws) +
                         " (groups=" + std::to_string(params.groups) + ")");
    }
    if (params.bias && static_cast<std::int64_t>(params.bias->size()) != ws.n) {
        throw ShapeError("conv2d bias length " + std::to_string(params.bias->size()) + " does not match weight " +
                         to_string(ws));
    }
    ConvGeometry g;
    g.in = in;
    g.w = ws;
    g.oh = conv_out_extent(in.h, ws.h, params.stride, padding);
    g.ow = conv_out_extent(in.w, ws.w, params.stride, padding);
    g.out_per_group = ws.n / params.groups;
    g.in_per_group = ws.c;
    g.stride = params.stride;
    g.padding = padding;
    g.groups = params.groups;
    return g;
}

// Gathers the receptive fields of output rows [oy0, oy1) into col (taps x pixels).
// Returns one row pointer per tap; pointwise convs alias the input directly.
std::vector<const float*> im2col(const ConvGeometry& g, const Tensor& input, std::int64_t n, std::int64_t grp,
                                 std::int64_t oy0, std::int64_t oy1, std::vector<float>& col) {
    const std::int64_t pixels = (oy1 - oy0) * g.ow;
    std::vector<const float*> rows(static_cast<std::size_t>(g.taps()));
    if (g.pointwise()) {
        for (std::int64_t icg = 0; icg < g.in_per_group; ++icg)
            rows[static_cast<std::size_t>(icg)] = input.plane(n, grp * g.in_per_group + icg) + oy0 * g.ow;
        return rows;
    }
    col.assign(static_cast<std::size_t>(g.taps() * pixels), 0.0f);
    const int s = g.stride;
    const int p = g.padding;
    for (std::int64_t icg = 0; icg < g.in_per_group; ++icg) {
        const float* src = input.plane(n, grp * g.in_per_group + icg);
        for (std::int64_t ky = 0; ky < g.w.h; ++ky)
            for (std::int64_t kx = 0; kx < g.w.w; ++kx) {
                const std::int64_t j = (icg * g.w.h + ky) * g.w.w + kx;
                float* dst = col.data() + j * pixels;
                rows[static_cast<std::size_t>(j)] = dst;
                const std::int64_t ox_lo = std::max<std::int64_t>(0, ceil_div(p - kx, s));
                const std::int64_t ox_hi = std::min(g.ow - 1, floor_div(g.in.w - 1 - kx + p, s));
                for (std::int64_t oy = oy0; oy < oy1; ++oy) {
                    const std::int64_t iy = oy * s + ky - p;
                    if (iy < 0 || iy >= g.in.h) continue;
                    const float* row = src + iy * g.in.w + (kx - p);
                    float* out = dst + (oy - oy0) * g.ow;
                    if (s == 1) {
                        for (std::int64_t ox = ox_lo; ox <= ox_hi; ++ox) out[ox] = row[ox];
                    } else {
                        for (std::int64_t ox = ox_lo; ox <= ox_hi; ++ox) out[ox] = row[ox * s];
                    }
                }
            }
    }
    return rows;
}

// Scatter-add of a column gradient back onto the input gradient planes.
void col2im(const ConvGeometry& g, const std::vector<float>& gcol, Tensor& gx, std::int64_t n, std::int64_t grp,
            std::int64_t oy0, std::int64_t oy1) {
    const std::int64_t pixels = (oy1 - oy0) * g.ow;
    const int s = g.stride;
    const int p = g.padding;
    for (std::int64_t icg = 0; icg < g.in_per_group; ++icg) {
        float* dst = gx.plane(n, grp * g.in_per_group + icg);
        for (std::int64_t ky = 0; ky < g.w.h; ++ky)
            for (std::int64_t kx = 0; kx < g.w.w; ++kx) {
                const std::int64_t j = (icg * g.w.h + ky) * g.w.w + kx;
                const float* src = gcol.data() + j * pixels;
                const std::int64_t ox_lo = std::max<std::int64_t>(0, ceil_div(p - kx, s));
                const std::int64_t ox_hi = std::min(g.ow - 1, floor_div(g.in.w - 1 - kx + p, s));
                for (std::int64_t oy = oy0; oy < oy1; ++oy) {
                    const std::int64_t iy = oy * s + ky - p;
                    if (iy < 0 || iy >= g.in.h) continue;
                    float* row = dst + iy * g.in.w + (kx - p);
                    const float* in = src + (oy - oy0) * g.ow;
                    if (s == 1) {
                        for (std::int64_t ox = ox_lo; ox <= ox_hi; ++ox) row[ox] += in[ox];
                    } else {
                        for (std::int64_t ox = ox_lo; ox <= ox_hi; ++ox) row[ox * s] += in[ox];
                    }
                }
            }
    }
}

// Fixed-order dot product with eight independent partial sums.
double dot(const float* a, const float* b, std::int64_t n) {
    float lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (int l = 0; l < 8; ++l) lanes[l] += a[i + l] * b[i + l];
    double acc = 0.0;
    for (float v : lanes) acc += v;
    for (; i < n; ++i) acc += static_cast<double>(a[i]) * b[i];
    return acc;
}

void check_grad_shape(const ConvGeometry& g, const Shape& gs) {
    if (gs.c != g.w.n || gs.n != g.in.n || gs.h != g.oh || gs.w != g.ow) {
        throw ShapeError("conv2d backward: gradient " + to_string(gs) + " does not match input " + to_string(g.in) +
                         " and weight " + to_string(g.w));
    }
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvParams& params, int padding) {
    const ConvGeometry g = conv_geometry(input.shape(), params, padding);
    if (g.oh <= 0 || g.ow <= 0) {
        throw ShapeError("conv2d produces empty output for input " + to_string(input.shape()) + " and weight " +
                         to_string(g.w));
    }
    Tensor out({g.in.n, g.w.n, g.oh, g.ow});
    const std::int64_t tr = g.tile_rows();
    const std::int64_t tiles = (g.oh + tr - 1) / tr;
    const std::int64_t taps = g.taps();

    parallel_for(g.in.n * g.groups * tiles, [&](std::int64_t job) {
        const std::int64_t tile = job % tiles;
        const std::int64_t grp = (job / tiles) % g.groups;
        const std::int64_t n = job / (tiles * g.groups);
        const std::int64_t oy0 = tile * tr;
        const std::int64_t oy1 = std::min(g.oh, oy0 + tr);
        const std::int64_t pixels = (oy1 - oy0) * g.ow;
        std::vector<float> col;
        const auto rows = im2col(g, input, n, grp, oy0, oy1, col);
        for (std::int64_t oc = grp * g.out_per_group; oc < (grp + 1) * g.out_per_group; ++oc) {
            float* dst = out.plane(n, oc) + oy0 * g.ow;
            const float b = params.bias ? (*params.bias)[static_cast<std::size_t>(oc)] : 0.0f;
            std::fill(dst, dst + pixels, b);
            const float* wk = params.weight.plane(oc, 0);
            for (std::int64_t j = 0; j < taps; ++j) {
                const float wv = wk[j];
                const float* src = rows[static_cast<std::size_t>(j)];
                for (std::int64_t q = 0; q < pixels; ++q) dst[q] += wv * src[q];
            }
        }
    });
    return out;
}

Tensor conv2d_backward_input(const Tensor& grad_out, const ConvParams& params, int padding, const Shape& input_shape) {
    const ConvGeometry g = conv_geometry(input_shape, params, padding);
    check_grad_shape(g, grad_out.shape());
    Tensor gx(input_shape);
    const std::int64_t tr = g.tile_rows();
    const std::int64_t taps = g.taps();

    parallel_for(g.in.n * g.groups, [&](std::int64_t job) {
        const std::int64_t grp = job % g.groups;
        const std::int64_t n = job / g.groups;
        std::vector<float> gcol;
        for (std::int64_t oy0 = 0; oy0 < g.oh; oy0 += tr) {
            const std::int64_t oy1 = std::min(g.oh, oy0 + tr);
            const std::int64_t pixels = (oy1 - oy0) * g.ow;
            gcol.assign(static_cast<std::size_t>(taps * pixels), 0.0f);
            for (std::int64_t oc = grp * g.out_per_group; oc < (grp + 1) * g.out_per_group; ++oc) {
                const float* src = grad_out.plane(n, oc) + oy0 * g.ow;
                const float* wk = params.weight.plane(oc, 0);
                for (std::int64_t j = 0; j < taps; ++j) {
                    const float wv = wk[j];
                    float* dst = gcol.data() + j * pixels;
                    for (std::int64_t q = 0; q < pixels; ++q) dst[q] += wv * src[q];
                }
            }
            col2im(g, gcol, gx, n, grp, oy0, oy1);
        }
    });
    return gx;
}

ConvGrads conv2d_backward_params(const Tensor& input, const Tensor& grad_out, const ConvParams& params, int padding) {
    const ConvGeometry g = conv_geometry(input.shape(), params, padding);
    check_grad_shape(g, grad_out.shape());
    const std::int64_t tr = g.tile_rows();
    const std::int64_t taps = g.taps();
    std::vector<double> acc(static_cast<std::size_t>(g.w.n * taps), 0.0);
    std::vector<double> bias_acc(static_cast<std::size_t>(g.w.n), 0.0);

    std::vector<float> col;
    for (std::int64_t n = 0; n < g.in.n; ++n)
        for (std::int64_t grp = 0; grp < g.groups; ++grp)
            for (std::int64_t oy0 = 0; oy0 < g.oh; oy0 += tr) {
                const std::int64_t oy1 = std::min(g.oh, oy0 + tr);
                const std::int64_t pixels = (oy1 - oy0) * g.ow;
                const auto rows = im2col(g, input, n, grp, oy0, oy1, col);
                parallel_for(g.out_per_group, [&](std::int64_t k) {
                    const std::int64_t oc = grp * g.out_per_group + k;
                    const float* src = grad_out.plane(n, oc) + oy0 * g.ow;
                    double* dst = acc.data() + oc * taps;
                    for (std::int64_t j = 0; j < taps; ++j) dst[j] += dot(src, rows[static_cast<std::size_t>(j)], pixels);
                    if (params.bias) {
                        double b = 0.0;
                        for (std::int64_t q = 0; q < pixels; ++q) b += src[q];
                        bias_acc[static_cast<std::size_t>(oc)] += b;
                    }
                });
            }

    ConvGrads out{Tensor(g.w), {}};
    for (std::size_t i = 0; i < acc.size(); ++i) out.weight.data()[i] = static_cast<float>(acc[i]);
    if (params.bias) out.bias.assign(bias_acc.begin(), bias_acc.end());
    return out;
}

Tensor pixel_shuffle(const Tensor& input, int r) {
    const Shape& s = input.shape();
    if (r < 1) throw ShapeError("pixel_shuffle factor must be positive");
    if (s.c % (r * r) != 0) {
        throw ShapeError("pixel_shuffle: channels " + std::to_string(s.c) + " not divisible by r^2=" +
                         std::to_string(r * r));
    }
    const std::int64_t oc = s.c / (r * r);
    Tensor out({s.n, oc, s.h * r, s.w * r});
    for (std::int64_t n = 0; n < s.n; ++n)
        for (std::int64_t c = 0; c < oc; ++c)
            for (int dy = 0; dy < r; ++dy)
                for (int dx = 0; dx < r; ++dx) {
                    const float* src = input.plane(n, c * r * r + dy * r + dx);
                    for (std::int64_t y = 0; y < s.h; ++y)
                        for (std::int64_t x = 0; x < s.w; ++x)
                            out.at(n, c, y * r + dy, x * r + dx) = src[y * s.w + x];
                }
    return out;
}

Tensor pixel_unshuffle(const Tensor& input, int r) {
    const Shape& s = input.shape();
    if (r < 1) throw ShapeError("pixel_unshuffle factor must be positive");
    if (s.h % r != 0 || s.w % r != 0) {
        throw ShapeError("pixel_unshuffle: spatial " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                         " not divisible by " + std::to_string(r));
    }
    const std::int64_t oh = s.h / r;
    const std::int64_t ow = s.w / r;
    Tensor out({s.n, s.c * r * r, oh, ow});
    for (std::int64_t n = 0; n < s.n; ++n)
        for (std::int64_t c = 0; c < s.c; ++c)
            for (int dy = 0; dy < r; ++dy)
                for (int dx = 0; dx < r; ++dx) {
                    float* dst = out.plane(n, c * r * r + dy * r + dx);
                    for (std::int64_t y = 0; y < oh; ++y)
                        for (std::int64_t x = 0; x < ow; ++x) dst[y * ow + x] = input.at(n, c, y * r + dy, x * r + dx);
                }
    return out;
}

float activation_scalar(float x, ActivationKind kind) {
    switch (kind) {
        case ActivationKind::relu: return x > 0.0f ? x : 0.0f;
        case ActivationKind::gelu_tanh_approx:
            return 0.5f * x * (1.0f + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
        case ActivationKind::sigmoid: return sigmoid(x);
        case ActivationKind::identity: return x;
        case ActivationKind::sigmoid_centered:
            // tanh form keeps f(-x) == -f(x) exactly in floating point.
            return 0.5f * std::tanh(0.5f * x);
    }
    return x;
}

float activation_derivative(float x, ActivationKind kind) {
    switch (kind) {
        case ActivationKind::relu: return x > 0.0f ? 1.0f : 0.0f;
        case ActivationKind::gelu_tanh_approx: {
            const float u = kGeluC * (x + kGeluA * x * x * x);
            const float t = std::tanh(u);
            const float du = kGeluC * (1.0f + 3.0f * kGeluA * x * x);
            return 0.5f * (1.0f + t) + 0.5f * x * (1.0f - t * t) * du;
        }
        case ActivationKind::sigmoid: {
            const float sg = sigmoid(x);
            return sg * (1.0f - sg);
        }
        case ActivationKind::identity: return 1.0f;
        case ActivationKind::sigmoid_centered: {
            const float t = std::tanh(0.5f * x);
            return 0.25f * (1.0f - t * t);
        }
    }
    return 1.0f;
}

Tensor activation_apply(const Tensor& input, ActivationKind kind) {
    Tensor out = input;
    if (kind == ActivationKind::identity) return out;
    for (float& v : out.data()) v = activation_scalar(v, kind);
    return out;
}

Tensor elementwise(const Tensor& a, const Tensor& b, ElementwiseOp op) {
    if (!(a.shape() == b.shape())) {
        throw ShapeError("elementwise shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
    Tensor out = a;
    auto d = out.data();
    const auto db = b.data();
    if (op == ElementwiseOp::add) {
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += db[i];
    } else {
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= db[i];
    }
    return out;
}

Tensor concat_channels(std::span<const Tensor> parts) {
    if (parts.empty()) throw ShapeError("concat_channels of an empty list");
    const Shape first = parts.front().shape();
    std::int64_t channels = 0;
    for (const auto& t : parts) {
        const Shape& s = t.shape();
        if (s.n != first.n || s.h != first.h || s.w != first.w) {
            throw ShapeError("concat_channels mismatch " + to_string(first) + " vs " + to_string(s));
        }
        channels += s.c;
    }
    Tensor out({first.n, channels, first.h, first.w});
    for (std::int64_t n = 0; n < first.n; ++n) {
        std::int64_t offset = 0;
        for (const auto& t : parts) {
            const auto len = t.shape().c * first.h * first.w;
            std::copy_n(t.plane(n, 0), len, out.plane(n, offset));
            offset += t.shape().c;
        }
    }
    return out;
}

Tensor slice_channels(const Tensor& input, std::int64_t begin, std::int64_t end) {
    const Shape& s = input.shape();
    if (begin < 0 || end > s.c || begin >= end) {
        throw ShapeError("channel slice [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of range for " + to_string(s));
    }
    Tensor out({s.n, end - begin, s.h, s.w});
    for (std::int64_t n = 0; n < s.n; ++n) {
        std::copy_n(input.plane(n, begin), (end - begin) * s.h * s.w, out.plane(n, 0));
    }
    return out;
}

Tensor pad_zero(const Tensor& input, int p) {
    if (p < 0) throw ShapeError("negative padding");
    if (p == 0) return input;
    const Shape& s = input.shape();
    Tensor out({s.n, s.c, s.h + 2 * p, s.w + 2 * p});
    for (std::int64_t n = 0; n < s.n; ++n)
        for (std::int64_t c = 0; c < s.c; ++c)
            for (std::int64_t y = 0; y < s.h; ++y)
                std::copy_n(input.plane(n, c) + y * s.w, s.w, &out.at(n, c, y + p, p));
    return out;
}

Tensor crop(const Tensor& input, int p) {
    if (p < 0) throw ShapeError("negative crop");
    if (p == 0) return input;
    const Shape& s = input.shape();
    if (s.h <= 2 * p || s.w <= 2 * p) {
        throw ShapeError("crop " + std::to_string(p) + " leaves nothing of " + to_string(s));
    }
    Tensor out({s.n, s.c, s.h - 2 * p, s.w - 2 * p});
    const auto ow = s.w - 2 * p;
    for (std::int64_t n = 0; n < s.n; ++n)
        for (std::int64_t c = 0; c < s.c; ++c)
            for (std::int64_t y = 0; y < s.h - 2 * p; ++y)
                std::copy_n(input.plane(n, c) + (y + p) * s.w + p, ow, out.plane(n, c) + y * ow);
    return out;
}

Tensor channel_scale(const Tensor& input, std::span<const float> scale) {
    const Shape& s = input.shape();
    if (static_cast<std::int64_t>(scale.size()) != s.c) {
        throw ShapeError("channel_scale length " + std::to_string(scale.size()) + " vs channels " +
                         std::to_string(s.c));
    }
    Tensor out = input;
    for (std::int64_t n = 0; n < s.n; ++n)
        for (std::int64_t c = 0; c < s.c; ++c) {
            float* d = out.plane(n, c);
            const float k = scale[static_cast<std::size_t>(c)];
            for (std::int64_t i = 0; i < s.plane(); ++i) d[i] *= k;
        }
    return out;
}

Tensor repeat_channels(const Tensor& input, int times) {
    if (times < 1) throw ShapeError("repeat factor must be positive");
    const Shape& s = input.shape();
    Tensor out({s.n, s.c * times, s.h, s.w});
    for (std::int64_t n = 0; n < s.n; ++n)
        for (std::int64_t c = 0; c < s.c; ++c)
            for (int t = 0; t < times; ++t) std::copy_n(input.plane(n, c), s.plane(), out.plane(n, c * times + t));
    return out;
}

}  // namespace rtsr

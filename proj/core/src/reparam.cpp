#include "rtsr/reparam.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "rtsr/detail/graph_eval.hpp"
#include "rtsr/detail/tensor_exec.hpp"
#include "rtsr/errors.hpp"

namespace rtsr {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

int conv_radius_unchecked(const ConvParams& p) { return static_cast<int>(std::max(p.kernel_h(), p.kernel_w()) / 2); }

std::vector<double> bias_or_zero(const ConvParams& p) {
    std::vector<double> b(static_cast<std::size_t>(p.out_channels()), 0.0);
    if (p.bias) std::copy(p.bias->begin(), p.bias->end(), b.begin());
    return b;
}

void require_stride_one(const ConvParams& p, const char* what) {
    if (p.stride != 1) throw ShapeError(std::string(what) + ": nonunit stride " + std::to_string(p.stride));
}

// Copies `src` (out, in, k, k) into the centre of a zero (out, in, size, size) kernel and adds it to dst.
void accumulate_centered(std::vector<double>& dst, std::int64_t size, std::int64_t out_offset, std::int64_t in_offset,
                         std::int64_t total_in, const ConvParams& src) {
    const Shape& s = src.weight.shape();
    const std::int64_t off = (size - s.h) / 2;
    for (std::int64_t o = 0; o < s.n; ++o)
        for (std::int64_t i = 0; i < s.c; ++i)
            for (std::int64_t y = 0; y < s.h; ++y)
                for (std::int64_t x = 0; x < s.w; ++x) {
                    const auto idx = (((o + out_offset) * total_in + (i + in_offset)) * size + (y + off)) * size + (x + off);
                    dst[static_cast<std::size_t>(idx)] += src.weight.at(o, i, y, x);
                }
}

Tensor to_float_tensor(Shape shape, const std::vector<double>& v) {
    std::vector<float> f(v.begin(), v.end());
    return Tensor(shape, std::move(f));
}

std::optional<std::vector<float>> to_float_bias(const std::vector<double>& b, bool present) {
    if (!present) return std::nullopt;
    return std::vector<float>(b.begin(), b.end());
}

ConvParams lower_inner(const BranchGraph& g);

ConvParams fixed_filter_conv(FixedFilterKind kind, const std::vector<float>& scale) {
    const auto c = static_cast<std::int64_t>(scale.size());
    const auto stencil = fixed_stencil(kind);
    ConvParams p = ConvParams::make(c, c, 3, false);
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (int k = 0; k < 9; ++k) p.weight.at(ch, ch, k / 3, k % 3) = stencil[static_cast<std::size_t>(k)] * scale[static_cast<std::size_t>(ch)];
    return p;
}

ConvParams lower_inner(const BranchGraph& g) {
    return std::visit(
        Overloaded{
            [](const ConvNode& n) {
                detail::conv_radius(n.params);
                ConvParams p = to_dense(n.params);
                p.padding = static_cast<int>(p.kernel_h() / 2);
                return p;
            },
            [&](const SequentialNode& n) {
                if (n.children.empty()) throw ShapeError("cannot lower empty Sequential node");
                ConvParams acc = lower_inner(n.children.front());
                for (std::size_t i = 1; i < n.children.size(); ++i) acc = fuse_sequential(acc, lower_inner(n.children[i]));
                return acc;
            },
            [&](const ParallelSumNode& n) {
                std::vector<ConvParams> parts;
                parts.reserve(n.branches.size());
                for (const auto& b : n.branches) parts.push_back(lower_inner(b));
                if (parts.size() == 1) return parts.front();
                return fuse_parallel_sum(parts);
            },
            [](const IdentityNode& n) { return dirac(n.channels, 1); },
            [](const ChannelScaleNode& n) { return dirac(static_cast<std::int64_t>(n.scale.size()), 1, n.scale); },
            [](const FixedFilterNode& n) { return fixed_filter_conv(n.kind, n.scale); },
            [](const DualStreamNode& n) { return fuse_dual_stream(n); },
            [&](const ActivationNode&) -> ConvParams {
                throw ShapeError("unfusible node " + describe(g) + ": activations cannot be folded into a conv");
            },
        },
        g.node);
}

void strip_conv(ConvParams& p) { p.bias.reset(); }

}  // namespace

std::string_view to_string(FixedFilterKind kind) {
    switch (kind) {
        case FixedFilterKind::sobel_x: return "sobel_x";
        case FixedFilterKind::sobel_y: return "sobel_y";
        case FixedFilterKind::laplacian: return "laplacian";
    }
    return "sobel_x";
}

FixedFilterKind fixed_filter_from_string(std::string_view name) {
    if (name == "sobel_x") return FixedFilterKind::sobel_x;
    if (name == "sobel_y") return FixedFilterKind::sobel_y;
    if (name == "laplacian") return FixedFilterKind::laplacian;
    throw DataError("unknown fixed filter '" + std::string(name) + "'");
}

std::array<float, 9> fixed_stencil(FixedFilterKind kind) {
    switch (kind) {
        case FixedFilterKind::sobel_x: return {1, 0, -1, 2, 0, -2, 1, 0, -1};
        case FixedFilterKind::sobel_y: return {1, 2, 1, 0, 0, 0, -1, -2, -1};
        case FixedFilterKind::laplacian: return {0, 1, 0, 1, -4, 1, 0, 1, 0};
    }
    return {};
}

std::int64_t in_channels(const BranchGraph& g) {
    return std::visit(Overloaded{
                          [](const ConvNode& n) { return n.params.in_channels(); },
                          [](const SequentialNode& n) -> std::int64_t {
                              for (const auto& c : n.children) {
                                  if (auto v = in_channels(c); v >= 0) return v;
                              }
                              return -1;
                          },
                          [](const ParallelSumNode& n) -> std::int64_t {
                              return n.branches.empty() ? -1 : in_channels(n.branches.front());
                          },
                          [](const IdentityNode& n) { return n.channels; },
                          [](const ChannelScaleNode& n) { return static_cast<std::int64_t>(n.scale.size()); },
                          [](const FixedFilterNode& n) { return static_cast<std::int64_t>(n.scale.size()); },
                          [](const DualStreamNode& n) { return n.k_b.in_channels() + n.k_r.in_channels(); },
                          [](const ActivationNode&) -> std::int64_t { return -1; },
                      },
                      g.node);
}

std::int64_t out_channels(const BranchGraph& g) {
    return std::visit(Overloaded{
                          [](const ConvNode& n) { return n.params.out_channels(); },
                          [](const SequentialNode& n) -> std::int64_t {
                              for (auto it = n.children.rbegin(); it != n.children.rend(); ++it) {
                                  if (auto v = out_channels(*it); v >= 0) return v;
                              }
                              return -1;
                          },
                          [](const ParallelSumNode& n) -> std::int64_t {
                              return n.branches.empty() ? -1 : out_channels(n.branches.front());
                          },
                          [](const IdentityNode& n) { return n.channels; },
                          [](const ChannelScaleNode& n) { return static_cast<std::int64_t>(n.scale.size()); },
                          [](const FixedFilterNode& n) { return static_cast<std::int64_t>(n.scale.size()); },
                          [](const DualStreamNode& n) { return n.k_b.out_channels() + n.k_r.out_channels(); },
                          [](const ActivationNode&) -> std::int64_t { return -1; },
                      },
                      g.node);
}

int radius(const BranchGraph& g) {
    return std::visit(Overloaded{
                          [](const ConvNode& n) { return conv_radius_unchecked(n.params); },
                          [](const SequentialNode& n) {
                              int r = 0;
                              for (const auto& c : n.children) r += radius(c);
                              return r;
                          },
                          [](const ParallelSumNode& n) {
                              int r = 0;
                              for (const auto& b : n.branches) r = std::max(r, radius(b));
                              return r;
                          },
                          [](const IdentityNode&) { return 0; },
                          [](const ChannelScaleNode&) { return 0; },
                          [](const FixedFilterNode&) { return 1; },
                          [](const DualStreamNode& n) {
                              return std::max({conv_radius_unchecked(n.k_b), conv_radius_unchecked(n.k_r2b),
                                               conv_radius_unchecked(n.k_b2r), conv_radius_unchecked(n.k_r)});
                          },
                          [](const ActivationNode&) { return 0; },
                      },
                      g.node);
}

std::string describe(const BranchGraph& g) {
    std::ostringstream os;
    std::visit(Overloaded{
                   [&](const ConvNode& n) {
                       os << "Conv(" << n.params.in_channels() << "->" << n.params.out_channels() << ", "
                          << n.params.kernel_h() << "x" << n.params.kernel_w() << ")";
                   },
                   [&](const SequentialNode& n) {
                       os << "Sequential[";
                       for (std::size_t i = 0; i < n.children.size(); ++i) os << (i ? ", " : "") << describe(n.children[i]);
                       os << "]";
                   },
                   [&](const ParallelSumNode& n) {
                       os << "ParallelSum[";
                       for (std::size_t i = 0; i < n.branches.size(); ++i) os << (i ? ", " : "") << describe(n.branches[i]);
                       os << "]";
                   },
                   [&](const IdentityNode& n) { os << "Identity(" << n.channels << ")"; },
                   [&](const ChannelScaleNode& n) { os << "ChannelScale(" << n.scale.size() << ")"; },
                   [&](const FixedFilterNode& n) { os << "FixedFilter(" << to_string(n.kind) << ", " << n.scale.size() << ")"; },
                   [&](const DualStreamNode& n) {
                       os << "DualStream(" << n.k_b.in_channels() << "+" << n.k_r.in_channels() << "->"
                          << n.k_b.out_channels() << "+" << n.k_r.out_channels() << ")";
                   },
                   [&](const ActivationNode& n) { os << "Activation(" << to_string(n.kind) << ")"; },
               },
               g.node);
    return os.str();
}

void validate(const BranchGraph& g) {
    std::visit(Overloaded{
                   [&](const ConvNode& n) {
                       if (n.params.bias && static_cast<std::int64_t>(n.params.bias->size()) != n.params.out_channels()) {
                           throw ShapeError("bias length mismatch in " + describe(g));
                       }
                   },
                   [&](const SequentialNode& n) {
                       if (n.children.empty()) throw ShapeError("empty Sequential node");
                       std::int64_t prev = -1;
                       for (const auto& c : n.children) {
                           validate(c);
                           const auto in = in_channels(c);
                           if (prev >= 0 && in >= 0 && in != prev) {
                               throw ShapeError("Sequential interface mismatch at " + describe(c) + ": expected " +
                                                std::to_string(prev) + " input channels");
                           }
                           if (auto out = out_channels(c); out >= 0) prev = out;
                       }
                   },
                   [&](const ParallelSumNode& n) {
                       if (n.branches.empty()) throw ShapeError("empty ParallelSum node");
                       const auto in = in_channels(n.branches.front());
                       const auto out = out_channels(n.branches.front());
                       for (const auto& b : n.branches) {
                           validate(b);
                           if (in_channels(b) != in || out_channels(b) != out) {
                               throw ShapeError("ParallelSum branch " + describe(b) + " differs from " +
                                                describe(n.branches.front()));
                           }
                       }
                   },
                   [](const IdentityNode&) {},
                   [](const ChannelScaleNode&) {},
                   [](const FixedFilterNode&) {},
                   [&](const DualStreamNode& n) {
                       const bool ok = n.k_r2b.out_channels() == n.k_b.out_channels() &&
                                       n.k_b2r.out_channels() == n.k_r.out_channels() &&
                                       n.k_b2r.in_channels() == n.k_b.in_channels() &&
                                       n.k_r2b.in_channels() == n.k_r.in_channels();
                       if (!ok) throw ShapeError("inconsistent dual-stream blocks in " + describe(g));
                   },
                   [](const ActivationNode&) {},
               },
               g.node);
}

std::int64_t parameter_count(const BranchGraph& g) {
    return std::visit(Overloaded{
                          [](const ConvNode& n) { return n.params.parameter_count(); },
                          [](const SequentialNode& n) {
                              std::int64_t s = 0;
                              for (const auto& c : n.children) s += parameter_count(c);
                              return s;
                          },
                          [](const ParallelSumNode& n) {
                              std::int64_t s = 0;
                              for (const auto& b : n.branches) s += parameter_count(b);
                              return s;
                          },
                          [](const IdentityNode&) -> std::int64_t { return 0; },
                          [](const ChannelScaleNode& n) { return static_cast<std::int64_t>(n.scale.size()); },
                          [](const FixedFilterNode& n) { return static_cast<std::int64_t>(n.scale.size()); },
                          [](const DualStreamNode& n) {
                              return n.k_b.parameter_count() + n.k_r2b.parameter_count() + n.k_b2r.parameter_count() +
                                     n.k_r.parameter_count();
                          },
                          [](const ActivationNode&) -> std::int64_t { return 0; },
                      },
                      g.node);
}

namespace {

void visit_conv(ConvParams& p, const std::string& prefix, const ParamVisitor& fn) {
    const Shape& s = p.weight.shape();
    fn(prefix + ".weight", p.weight.data(), {s.n, s.c, s.h, s.w});
    if (p.bias) fn(prefix + ".bias", *p.bias, {static_cast<std::int64_t>(p.bias->size())});
}

}  // namespace

void for_each_parameter(BranchGraph& g, const std::string& prefix, const ParamVisitor& fn) {
    std::visit(Overloaded{
                   [&](ConvNode& n) { visit_conv(n.params, prefix, fn); },
                   [&](SequentialNode& n) {
                       for (std::size_t i = 0; i < n.children.size(); ++i)
                           for_each_parameter(n.children[i], prefix + ".seq" + std::to_string(i), fn);
                   },
                   [&](ParallelSumNode& n) {
                       for (std::size_t i = 0; i < n.branches.size(); ++i)
                           for_each_parameter(n.branches[i], prefix + ".branch" + std::to_string(i), fn);
                   },
                   [](IdentityNode&) {},
                   [&](ChannelScaleNode& n) { fn(prefix + ".scale", n.scale, {static_cast<std::int64_t>(n.scale.size())}); },
                   [&](FixedFilterNode& n) { fn(prefix + ".scale", n.scale, {static_cast<std::int64_t>(n.scale.size())}); },
                   [&](DualStreamNode& n) {
                       visit_conv(n.k_b, prefix + ".k_b", fn);
                       visit_conv(n.k_r2b, prefix + ".k_r2b", fn);
                       visit_conv(n.k_b2r, prefix + ".k_b2r", fn);
                       visit_conv(n.k_r, prefix + ".k_r", fn);
                   },
                   [](ActivationNode&) {},
               },
               g.node);
}

ConvParams to_dense(const ConvParams& p) {
    if (p.groups == 1) return p;
    const Shape& s = p.weight.shape();
    const std::int64_t in = p.in_channels();
    const std::int64_t out_per_group = s.n / p.groups;
    ConvParams d = p;
    d.groups = 1;
    d.weight = Tensor::zeros({s.n, in, s.h, s.w});
    for (std::int64_t o = 0; o < s.n; ++o) {
        const std::int64_t g = o / out_per_group;
        for (std::int64_t i = 0; i < s.c; ++i)
            for (std::int64_t y = 0; y < s.h; ++y)
                for (std::int64_t x = 0; x < s.w; ++x) d.weight.at(o, g * s.c + i, y, x) = p.weight.at(o, i, y, x);
    }
    return d;
}

ConvParams dirac(std::int64_t channels, int k, std::span<const float> scale) {
    if (!scale.empty() && static_cast<std::int64_t>(scale.size()) != channels) {
        throw ShapeError("dirac scale length mismatch");
    }
    ConvParams p = ConvParams::make(channels, channels, k, false);
    for (std::int64_t c = 0; c < channels; ++c)
        p.weight.at(c, c, k / 2, k / 2) = scale.empty() ? 1.0f : scale[static_cast<std::size_t>(c)];
    return p;
}

ConvParams fuse_sequential(const ConvParams& first_in, const ConvParams& second_in) {
    require_stride_one(first_in, "fuse_sequential");
    require_stride_one(second_in, "fuse_sequential");
    const ConvParams first = to_dense(first_in);
    const ConvParams second = to_dense(second_in);
    if (first.out_channels() != second.in_channels()) {
        throw ShapeError("fuse_sequential channel mismatch: first emits " + std::to_string(first.out_channels()) +
                         ", second expects " + std::to_string(second.in_channels()));
    }
    const Shape& s1 = first.weight.shape();
    const Shape& s2 = second.weight.shape();
    const bool first_pointwise = s1.h == 1 && s1.w == 1;
    const bool second_pointwise = s2.h == 1 && s2.w == 1;
    if (!first_pointwise && !second_pointwise) {
        throw ShapeError("fuse_sequential: unsupported kernel pair " + std::to_string(s1.h) + "x" + std::to_string(s1.w) +
                         " then " + std::to_string(s2.h) + "x" + std::to_string(s2.w));
    }
    if (s1.h != s1.w || s2.h != s2.w || s1.h % 2 == 0 || s2.h % 2 == 0) {
        throw ShapeError("fuse_sequential needs square odd kernels");
    }
    const std::int64_t k = s1.h + s2.h - 1;
    const std::int64_t out = s2.n, mid = s1.n, in = s1.c;
    std::vector<double> w(static_cast<std::size_t>(out * in * k * k), 0.0);
    for (std::int64_t o = 0; o < out; ++o)
        for (std::int64_t m = 0; m < mid; ++m)
            for (std::int64_t y2 = 0; y2 < s2.h; ++y2)
                for (std::int64_t x2 = 0; x2 < s2.w; ++x2) {
                    const double w2 = second.weight.at(o, m, y2, x2);
                    if (w2 == 0.0) continue;
                    for (std::int64_t i = 0; i < in; ++i)
                        for (std::int64_t y1 = 0; y1 < s1.h; ++y1)
                            for (std::int64_t x1 = 0; x1 < s1.w; ++x1) {
                                const auto idx = ((o * in + i) * k + (y1 + y2)) * k + (x1 + x2);
                                w[static_cast<std::size_t>(idx)] += w2 * first.weight.at(m, i, y1, x1);
                            }
                }
    std::vector<double> b = bias_or_zero(second);
    if (first.bias) {
        for (std::int64_t o = 0; o < out; ++o) {
            double acc = 0.0;
            for (std::int64_t m = 0; m < mid; ++m) {
                double tap_sum = 0.0;
                for (std::int64_t y = 0; y < s2.h; ++y)
                    for (std::int64_t x = 0; x < s2.w; ++x) tap_sum += second.weight.at(o, m, y, x);
                acc += tap_sum * (*first.bias)[static_cast<std::size_t>(m)];
            }
            b[static_cast<std::size_t>(o)] += acc;
        }
    }
    ConvParams fused;
    fused.weight = to_float_tensor({out, in, k, k}, w);
    fused.bias = to_float_bias(b, first.bias.has_value() || second.bias.has_value());
    fused.stride = 1;
    fused.padding = static_cast<int>(k / 2);
    fused.groups = 1;
    return fused;
}

ConvParams fuse_parallel_sum(std::span<const ConvParams> branches) {
    if (branches.empty()) throw ShapeError("fuse_parallel_sum of no branches");
    if (branches.size() == 1) return branches.front();
    const std::int64_t in = branches.front().in_channels();
    const std::int64_t out = branches.front().out_channels();
    std::int64_t k = 1;
    bool any_bias = false;
    for (const auto& b : branches) {
        if (b.in_channels() != in || b.out_channels() != out) {
            throw ShapeError("fuse_parallel_sum heterogeneous channels: " + std::to_string(in) + "->" +
                             std::to_string(out) + " vs " + std::to_string(b.in_channels()) + "->" +
                             std::to_string(b.out_channels()));
        }
        require_stride_one(b, "fuse_parallel_sum");
        if (b.kernel_h() != b.kernel_w() || b.kernel_h() % 2 == 0) {
            throw ShapeError("fuse_parallel_sum needs square odd kernels");
        }
        k = std::max(k, b.kernel_h());
        any_bias = any_bias || b.bias.has_value();
    }
    std::vector<double> w(static_cast<std::size_t>(out * in * k * k), 0.0);
    std::vector<double> bias(static_cast<std::size_t>(out), 0.0);
    for (const auto& b : branches) {
        accumulate_centered(w, k, 0, 0, in, to_dense(b));
        if (b.bias) {
            for (std::size_t o = 0; o < bias.size(); ++o) bias[o] += (*b.bias)[o];
        }
    }
    ConvParams fused;
    fused.weight = to_float_tensor({out, in, k, k}, w);
    fused.bias = to_float_bias(bias, any_bias);
    fused.padding = static_cast<int>(k / 2);
    return fused;
}

ConvParams fuse_dual_stream(const DualStreamNode& ds) {
    validate(BranchGraph::dual_stream(ds));
    const ConvParams* blocks[] = {&ds.k_b, &ds.k_r2b, &ds.k_b2r, &ds.k_r};
    std::int64_t k = 1;
    for (const auto* b : blocks) {
        require_stride_one(*b, "fuse_dual_stream");
        if (b->kernel_h() != b->kernel_w() || b->kernel_h() % 2 == 0) {
            throw ShapeError("fuse_dual_stream needs square odd kernels");
        }
        k = std::max(k, b->kernel_h());
    }
    const std::int64_t cb_in = ds.k_b.in_channels(), cr_in = ds.k_r.in_channels();
    const std::int64_t cb_out = ds.k_b.out_channels(), cr_out = ds.k_r.out_channels();
    const std::int64_t in = cb_in + cr_in, out = cb_out + cr_out;
    std::vector<double> w(static_cast<std::size_t>(out * in * k * k), 0.0);
    accumulate_centered(w, k, 0, 0, in, to_dense(ds.k_b));
    accumulate_centered(w, k, 0, cb_in, in, to_dense(ds.k_r2b));
    accumulate_centered(w, k, cb_out, 0, in, to_dense(ds.k_b2r));
    accumulate_centered(w, k, cb_out, cb_in, in, to_dense(ds.k_r));
    std::vector<double> bias(static_cast<std::size_t>(out), 0.0);
    auto add_bias = [&](const ConvParams& p, std::int64_t offset) {
        if (!p.bias) return;
        for (std::size_t o = 0; o < p.bias->size(); ++o) bias[static_cast<std::size_t>(offset) + o] += (*p.bias)[o];
    };
    add_bias(ds.k_b, 0);
    add_bias(ds.k_r2b, 0);
    add_bias(ds.k_b2r, cb_out);
    add_bias(ds.k_r, cb_out);
    const bool any_bias = ds.k_b.bias || ds.k_r2b.bias || ds.k_b2r.bias || ds.k_r.bias;
    ConvParams fused;
    fused.weight = to_float_tensor({out, in, k, k}, w);
    fused.bias = to_float_bias(bias, any_bias);
    fused.padding = static_cast<int>(k / 2);
    return fused;
}

ConvParams lower_branch(const BranchGraph& g) {
    validate(g);
    if (const auto* c = std::get_if<ConvNode>(&g.node)) return c->params;
    return lower_inner(g);
}

ConvParams strip_bias(ConvParams params) {
    params.bias.reset();
    return params;
}

void strip_bias(BranchGraph& g) {
    std::visit(Overloaded{
                   [](ConvNode& n) { strip_conv(n.params); },
                   [](SequentialNode& n) {
                       for (auto& c : n.children) strip_bias(c);
                   },
                   [](ParallelSumNode& n) {
                       for (auto& b : n.branches) strip_bias(b);
                   },
                   [](IdentityNode&) {},
                   [](ChannelScaleNode&) {},
                   [](FixedFilterNode&) {},
                   [](DualStreamNode& n) {
                       strip_conv(n.k_b);
                       strip_conv(n.k_r2b);
                       strip_conv(n.k_b2r);
                       strip_conv(n.k_r);
                   },
                   [](ActivationNode&) {},
               },
               g.node);
}

Tensor forward_branch(const BranchGraph& g, const Tensor& input) {
    detail::TensorExec ex;
    return detail::eval_block(ex, g, input);
}

EquivalenceReport verify_equivalence(const BranchGraph& g, const ConvParams& fused, int trials, float tol,
                                     std::uint64_t seed) {
    if (trials < 1) throw UsageError("verify_equivalence needs at least one trial");
    const std::int64_t in = in_channels(g);
    if (in != fused.in_channels() || out_channels(g) != fused.out_channels()) {
        throw ShapeError("verify_equivalence: graph " + describe(g) + " and fused conv " +
                         std::to_string(fused.in_channels()) + "->" + std::to_string(fused.out_channels()) +
                         " disagree on channels");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    EquivalenceReport report;
    for (int t = 0; t < trials; ++t) {
        Tensor x({1, in, 8, 8});
        for (float& v : x.data()) v = normal(rng);
        const Tensor a = forward_branch(g, x);
        const Tensor b = conv2d(x, fused);
        if (!(a.shape() == b.shape())) {
            throw ShapeError("verify_equivalence: graph output " + to_string(a.shape()) + " vs fused output " +
                             to_string(b.shape()));
        }
        report.max_abs_err = std::max(report.max_abs_err, max_abs_diff(a, b));
    }
    report.pass = report.max_abs_err <= tol;
    return report;
}

namespace detail {

Tensor fixed_filter_valid(const Tensor& x, FixedFilterKind kind, const std::vector<float>& scale) {
    const auto c = static_cast<std::int64_t>(scale.size());
    if (x.shape().c != c) {
        throw ShapeError("fixed filter over " + std::to_string(c) + " channels applied to " + to_string(x.shape()));
    }
    const auto stencil = fixed_stencil(kind);
    ConvParams p = ConvParams::make(c, c, 3, false, 1, static_cast<int>(c));
    for (std::int64_t ch = 0; ch < c; ++ch)
        for (int k = 0; k < 9; ++k) p.weight.at(ch, 0, k / 3, k % 3) = stencil[static_cast<std::size_t>(k)] * scale[static_cast<std::size_t>(ch)];
    return conv2d(x, p, 0);
}

}  // namespace detail

}  // namespace rtsr

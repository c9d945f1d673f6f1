#pragma once

// Executor-generic evaluation of branch graphs. An executor provides
//   using Value;
//   Value conv(const Value&, const ConvParams&, int padding);
//   Value fixed_filter(const Value&, FixedFilterKind, const std::vector<float>& scale);  // valid, 3x3
//   Value channel_scale(const Value&, const std::vector<float>&);
//   Value act(const Value&, ActivationKind);
//   Value add(const Value&, const Value&);
//   Value mul(const Value&, const Value&);
//   Value concat(const std::vector<Value>&);
//   Value slice(const Value&, std::int64_t begin, std::int64_t end);
//   Value pad(const Value&, int);
//   Value crop(const Value&, int);
//   Value shuffle(const Value&, int);
//   Value unshuffle(const Value&, int);
//   Value repeat(const Value&, int);
// The plain executor computes tensors; the tape executor records gradients.

#include <string>
#include <type_traits>
#include <vector>

#include "rtsr/errors.hpp"
#include "rtsr/reparam.hpp"

namespace rtsr::detail {

inline int conv_radius(const ConvParams& p) {
    if (p.kernel_h() != p.kernel_w() || p.kernel_h() % 2 == 0) {
        throw ShapeError("branch convs need square odd kernels, got " + std::to_string(p.kernel_h()) + "x" +
                         std::to_string(p.kernel_w()));
    }
    if (p.stride != 1) throw ShapeError("branch convs must have stride 1");
    return static_cast<int>(p.kernel_h() / 2);
}

// Evaluates g on an input already zero-padded by radius(g); output shrinks by radius(g).
template <class Exec>
typename Exec::Value eval_valid(Exec& ex, const BranchGraph& g, const typename Exec::Value& x) {
    using Value = typename Exec::Value;
    return std::visit(
        [&](const auto& node) -> Value {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, ConvNode>) {
                conv_radius(node.params);
                return ex.conv(x, node.params, 0);
            } else if constexpr (std::is_same_v<T, SequentialNode>) {
                if (node.children.empty()) throw ShapeError("empty Sequential node");
                Value v = x;
                for (const auto& child : node.children) v = eval_valid(ex, child, v);
                return v;
            } else if constexpr (std::is_same_v<T, ParallelSumNode>) {
                if (node.branches.empty()) throw ShapeError("empty ParallelSum node");
                const int r = radius(g);
                Value acc = eval_valid(ex, node.branches.front(), ex.crop(x, r - radius(node.branches.front())));
                for (std::size_t i = 1; i < node.branches.size(); ++i) {
                    const auto& b = node.branches[i];
                    acc = ex.add(acc, eval_valid(ex, b, ex.crop(x, r - radius(b))));
                }
                return acc;
            } else if constexpr (std::is_same_v<T, IdentityNode>) {
                return x;
            } else if constexpr (std::is_same_v<T, ChannelScaleNode>) {
                return ex.channel_scale(x, node.scale);
            } else if constexpr (std::is_same_v<T, FixedFilterNode>) {
                return ex.fixed_filter(x, node.kind, node.scale);
            } else if constexpr (std::is_same_v<T, DualStreamNode>) {
                const int r = radius(g);
                const std::int64_t split = node.k_b.in_channels();
                const std::int64_t total = split + node.k_r.in_channels();
                const Value xb = ex.slice(x, 0, split);
                const Value xr = ex.slice(x, split, total);
                auto run = [&](const ConvParams& k, const Value& in) {
                    return ex.conv(ex.crop(in, r - conv_radius(k)), k, 0);
                };
                const Value top = ex.add(run(node.k_b, xb), run(node.k_r2b, xr));
                const Value bottom = ex.add(run(node.k_b2r, xb), run(node.k_r, xr));
                return ex.concat(std::vector<Value>{top, bottom});
            } else {
                return ex.act(x, node.kind);
            }
        },
        g.node);
}

// "Same"-size evaluation. A lone conv keeps its own stride and padding.
template <class Exec>
typename Exec::Value eval_block(Exec& ex, const BranchGraph& g, const typename Exec::Value& x) {
    if (const auto* c = std::get_if<ConvNode>(&g.node)) return ex.conv(x, c->params, c->params.padding);
    return eval_valid(ex, g, ex.pad(x, radius(g)));
}

}  // namespace rtsr::detail

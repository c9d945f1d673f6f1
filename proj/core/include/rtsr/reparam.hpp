#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rtsr/ops.hpp"

namespace rtsr {

enum class FixedFilterKind { sobel_x, sobel_y, laplacian };

std::string_view to_string(FixedFilterKind kind);
FixedFilterKind fixed_filter_from_string(std::string_view name);

/// Canonical 3x3 stencil, row-major.
std::array<float, 9> fixed_stencil(FixedFilterKind kind);

struct BranchGraph;

struct ConvNode {
    ConvParams params;
};
struct SequentialNode {
    std::vector<BranchGraph> children;
};
struct ParallelSumNode {
    std::vector<BranchGraph> branches;
};
struct IdentityNode {
    std::int64_t channels = 0;
};
struct ChannelScaleNode {
    std::vector<float> scale;
};
/// Depthwise fixed stencil times a learnable per-channel scale.
struct FixedFilterNode {
    FixedFilterKind kind = FixedFilterKind::sobel_x;
    std::vector<float> scale;
};
/// Block kernel [[k_b, k_r2b], [k_b2r, k_r]] over the channel split [backbone | residual].
struct DualStreamNode {
    ConvParams k_b;
    ConvParams k_r2b;
    ConvParams k_b2r;
    ConvParams k_r;
};
/// Never fusible; present so that malformed graphs can be described and rejected.
struct ActivationNode {
    ActivationKind kind = ActivationKind::relu;
};

/// Training-time multi-branch block. Every fusible graph is an affine,
/// shift-invariant map evaluated on its input zero-padded by radius().
struct BranchGraph {
    using Node = std::variant<ConvNode, SequentialNode, ParallelSumNode, IdentityNode, ChannelScaleNode,
                              FixedFilterNode, DualStreamNode, ActivationNode>;
    Node node;

    static BranchGraph conv(ConvParams p) { return {ConvNode{std::move(p)}}; }
    static BranchGraph sequential(std::vector<BranchGraph> c) { return {SequentialNode{std::move(c)}}; }
    static BranchGraph parallel_sum(std::vector<BranchGraph> b) { return {ParallelSumNode{std::move(b)}}; }
    static BranchGraph identity(std::int64_t channels) { return {IdentityNode{channels}}; }
    static BranchGraph channel_scale(std::vector<float> s) { return {ChannelScaleNode{std::move(s)}}; }
    static BranchGraph fixed_filter(FixedFilterKind k, std::vector<float> s) {
        return {FixedFilterNode{k, std::move(s)}};
    }
    static BranchGraph dual_stream(DualStreamNode d) { return {std::move(d)}; }
    static BranchGraph activation(ActivationKind k) { return {ActivationNode{k}}; }

    bool is_plain_conv() const { return std::holds_alternative<ConvNode>(node); }
};

std::int64_t in_channels(const BranchGraph& g);
std::int64_t out_channels(const BranchGraph& g);
/// Spatial half-extent of the receptive field (0 for 1x1, 1 for 3x3).
int radius(const BranchGraph& g);
std::string describe(const BranchGraph& g);

/// Checks channel consistency of every node; throws naming the offending node.
void validate(const BranchGraph& g);

/// Total number of scalars held by the graph.
std::int64_t parameter_count(const BranchGraph& g);

/// Calls fn(name, values, shape) for every learnable tensor, in a stable order.
using ParamVisitor =
    std::function<void(const std::string& name, std::span<float> values, const std::vector<std::int64_t>& shape)>;
void for_each_parameter(BranchGraph& g, const std::string& prefix, const ParamVisitor& fn);

/// Dense (groups = 1) equivalent of a grouped convolution.
ConvParams to_dense(const ConvParams& p);

/// Dirac kernel of size k that copies (and optionally scales) each channel.
ConvParams dirac(std::int64_t channels, int k, std::span<const float> scale = {});

/// second(first(x)) as one convolution. One of the two kernels must be 1x1.
ConvParams fuse_sequential(const ConvParams& first, const ConvParams& second);

/// Sum of branches; 1x1 kernels are zero-padded to the largest size.
ConvParams fuse_parallel_sum(std::span<const ConvParams> branches);

ConvParams fuse_dual_stream(const DualStreamNode& ds);

/// Recursive inside-out lowering to a single stride-1 convolution.
ConvParams lower_branch(const BranchGraph& g);

ConvParams strip_bias(ConvParams params);
void strip_bias(BranchGraph& g);

/// Unfused reference evaluation of a graph with "same" output size.
Tensor forward_branch(const BranchGraph& g, const Tensor& input);

struct EquivalenceReport {
    float max_abs_err = 0.0f;
    bool pass = false;
};

/// Compares graph and fused conv on `trials` unit-normal inputs of shape (1, in, 8, 8).
EquivalenceReport verify_equivalence(const BranchGraph& g, const ConvParams& fused, int trials, float tol,
                                     std::uint64_t seed = 0x5eed);

}  // namespace rtsr

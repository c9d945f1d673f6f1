#include <algorithm>

#include "rtsr/errors.hpp"
#include "rtsr/model.hpp"

namespace rtsr {

namespace {

BranchGraph conv(std::int64_t in, std::int64_t out, int k, bool bias = true, int stride = 1) {
    return BranchGraph::conv(ConvParams::make(in, out, k, bias, stride));
}

Layer block(BranchGraph g) { return BlockLayer{std::move(g)}; }
Layer act(ActivationKind k = ActivationKind::relu) { return ActivationLayer{k}; }

BranchGraph repvgg(std::int64_t c) {
    return BranchGraph::parallel_sum({conv(c, c, 3), conv(c, c, 1), BranchGraph::identity(c)});
}

// 3x3 plus a learnable per-channel scaled identity.
BranchGraph repconv(std::int64_t c) {
    return BranchGraph::parallel_sum({conv(c, c, 3), BranchGraph::channel_scale(std::vector<float>(c, 1.0f))});
}

// Expand by 4x through 1x1, mix with 3x3, project back; residual through a plain 1x1.
BranchGraph lpp_rep(std::int64_t in, std::int64_t out) {
    const auto mid = 4 * in;
    return BranchGraph::parallel_sum({
        BranchGraph::sequential({conv(in, mid, 1, false), conv(mid, mid, 3, false), conv(mid, out, 1, false)}),
        conv(in, out, 1, false),
    });
}

BranchGraph conv3xc(std::int64_t c) {
    return BranchGraph::parallel_sum({
        conv(c, c, 3),
        BranchGraph::sequential({conv(c, 2 * c, 1), conv(2 * c, 2 * c, 3), conv(2 * c, c, 1)}),
    });
}

BranchGraph ecb(std::int64_t in, std::int64_t out) {
    auto edge = [&](FixedFilterKind k) {
        return BranchGraph::sequential({conv(in, out, 1), BranchGraph::fixed_filter(k, std::vector<float>(out, 1.0f))});
    };
    return BranchGraph::parallel_sum({
        conv(in, out, 3),
        BranchGraph::sequential({conv(in, 2 * out, 1), conv(2 * out, out, 3)}),
        edge(FixedFilterKind::sobel_x),
        edge(FixedFilterKind::sobel_y),
        edge(FixedFilterKind::laplacian),
    });
}

BranchGraph nrb(std::int64_t c) {
    return BranchGraph::parallel_sum({
        BranchGraph::sequential({conv(c, 2 * c, 1), ecb(2 * c, 2 * c), conv(2 * c, c, 1)}),
        BranchGraph::identity(c),
    });
}

BranchGraph dual_stream(std::int64_t cb, std::int64_t cr) {
    return BranchGraph::dual_stream(DualStreamNode{
        ConvParams::make(cb, cb, 3, true),
        ConvParams::make(cr, cb, 3, false),
        ConvParams::make(cb, cr, 3, false),
        ConvParams::make(cr, cr, 3, true),
    });
}

ModelSpec lanczos_pp() {
    ModelSpec s{"lanczos_pp", 4, 24, true, {}};
    s.layers = {UnshuffleLayer{3},          block(lpp_rep(27, 24)),          act(),
                block(lpp_rep(24, 24)),     act(),                           block(conv(24, 432, 1, false)),
                ShuffleLayer{12}};
    return s;
}

ModelSpec c3() {
    ModelSpec s{"c3", 4, 32, true, {}};
    s.layers = {block(conv(3, 32, 3)), act(), block(repvgg(32)), act(), block(conv(32, 48, 3)), ShuffleLayer{4}};
    return s;
}

ModelSpec anunet() {
    constexpr std::int64_t c = 28;
    ModelSpec s{"anunet", 4, c, true, {}};
    const auto gelu = ActivationKind::gelu_tanh_approx;
    s.layers = {AnchorLayer{4, 0}, UnshuffleLayer{2}, block(ecb(12, c)), act(gelu)};
    for (int i = 0; i < 3; ++i) {
        s.layers.push_back(block(nrb(c)));
        s.layers.push_back(act(gelu));
    }
    s.layers.push_back(block(ecb(c, 192)));
    s.layers.push_back(ShuffleLayer{2});
    s.layers.push_back(AddTapLayer{0});
    s.layers.push_back(ShuffleLayer{4});
    return s;
}

ModelSpec ecb_resr() {
    constexpr std::int64_t c = 20;
    ModelSpec s{"ecb_resr", 4, c, true, {}};
    s.layers = {UnshuffleLayer{2},    block(ecb(12, c)), act(), block(ecb(c, c)), act(), block(ecb(c, c)), act(),
                block(ecb(c, 192)), ShuffleLayer{8}};
    return s;
}

ModelSpec vpeg_r() {
    constexpr std::int64_t c = 6;
    ModelSpec s{"vpeg_r", 4, c, true, {}};
    s.layers = {UnshuffleLayer{2}, block(conv(12, c, 3))};
    for (int i = 0; i < 3; ++i) {
        s.layers.push_back(block(repconv(c)));
        s.layers.push_back(act());
    }
    s.layers.push_back(block(conv(c, 192, 3)));
    s.layers.push_back(ShuffleLayer{8});
    return s;
}

ModelSpec pixelartai() {
    constexpr std::int64_t c = 36;
    ModelSpec s{"pixelartai", 4, c, false, {}};
    s.layers = {block(conv(3, c, 3, true, 2)), act(), block(ecb(c, c)), act(), block(ecb(c, 192)), ShuffleLayer{8}};
    return s;
}

ModelSpec urpnet() {
    constexpr std::int64_t c = 18;
    ModelSpec s{"urpnet", 4, c, false, {}};
    s.layers = {UnshuffleLayer{2}, block(ecb(12, c)), act(), block(ecb(c, c)), act(), block(conv(c, 192, 1)),
                ShuffleLayer{8}};
    return s;
}

ModelSpec etds() {
    constexpr std::int64_t cb = 32;
    constexpr std::int64_t cr = 3;
    ModelSpec s{"etds", 4, cb, false, {}};
    s.layers = {block(conv(3, cb + cr, 3)), act(),
                block(dual_stream(cb, cr)), act(),
                block(dual_stream(cb, cr)), act(),
                block(conv(cb + cr, 48, 3)), ShuffleLayer{4}};
    return s;
}

}  // namespace

ModelSpec reptcn_spec(std::int64_t channels) {
    ModelSpec s{"reptcn", 4, channels, true, {}};
    s.layers = {block(conv(3, channels, 3, false)), act(), block(repvgg(channels)), act(),
                block(conv(channels, 48, 3, false)), ShuffleLayer{4}};
    return s;
}

ModelSpec span_micro_spec(int spab_blocks, std::int64_t channels) {
    if (spab_blocks < 1) throw UsageError("SPAN-micro needs at least one SPAB");
    const auto c = channels;
    ModelSpec s{"span_micro", 4, c, true, {}};
    auto spab = [&] { return SpabLayer{{conv3xc(c), conv3xc(c), conv3xc(c)}}; };
    s.layers = {block(conv(3, c, 3)), act(), SaveTapLayer{0}, spab(), SaveTapLayer{1}};
    for (int i = 1; i < spab_blocks; ++i) s.layers.push_back(spab());
    s.layers.push_back(block(conv(c, c, 3)));
    s.layers.push_back(SaveTapLayer{2});
    s.layers.push_back(ConcatTapsLayer{{0, 1, 2}});
    s.layers.push_back(block(conv(3 * c, 48, 3)));
    s.layers.push_back(ShuffleLayer{4});
    if (spab_blocks != 2) s.name += "_" + std::to_string(spab_blocks);
    return s;
}

ModelSpec with_aux_head(ModelSpec spec) {
    auto it = std::find_if(spec.layers.rbegin(), spec.layers.rend(),
                           [](const Layer& l) { return std::holds_alternative<BlockLayer>(l); });
    if (it == spec.layers.rend()) throw UsageError("model '" + spec.name + "' has no block to attach an aux head to");
    const auto& last = std::get<BlockLayer>(*it).graph;
    const auto pos = std::prev(it.base());
    spec.layers.insert(pos, AuxHeadLayer{conv(in_channels(last), 12, 3), 2});
    check_spec(spec);
    return spec;
}

std::vector<ModelSpec> zoo_catalog() {
    return {reptcn_spec(16), lanczos_pp(), span_micro_spec(2, 12), c3(),   anunet(),
            ecb_resr(),      vpeg_r(),     pixelartai(),           urpnet(), etds()};
}

std::vector<std::string> zoo_names() {
    std::vector<std::string> names;
    for (const auto& s : zoo_catalog()) names.push_back(s.name);
    return names;
}

ModelSpec zoo_spec(const std::string& name) {
    for (auto& s : zoo_catalog())
        if (s.name == name) return s;
    std::string known;
    for (const auto& n : zoo_names()) known += (known.empty() ? "" : ", ") + n;
    throw UsageError("unknown model '" + name + "' (known: " + known + ")");
}

}  // namespace rtsr

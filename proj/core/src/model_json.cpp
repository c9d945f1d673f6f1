#include <json.hpp>

#include "rtsr/errors.hpp"
#include "rtsr/model.hpp"

namespace rtsr {

using nlohmann::json;

namespace {

json conv_to_json(const ConvParams& p) {
    return {{"in", p.in_channels()}, {"out", p.out_channels()}, {"kh", p.kernel_h()},      {"kw", p.kernel_w()},
            {"stride", p.stride},    {"padding", p.padding},    {"groups", p.groups}, {"bias", p.bias.has_value()}};
}

ConvParams conv_from_json(const json& j) {
    const auto in = j.at("in").get<std::int64_t>();
    const auto out = j.at("out").get<std::int64_t>();
    const auto kh = j.at("kh").get<std::int64_t>();
    const auto kw = j.at("kw").get<std::int64_t>();
    const int groups = j.at("groups").get<int>();
    if (in <= 0 || out <= 0 || kh <= 0 || kw <= 0 || groups <= 0 || in % groups != 0 || out % groups != 0) {
        throw DataError("invalid conv geometry " + j.dump());
    }
    ConvParams p;
    p.weight = Tensor::zeros({out, in / groups, kh, kw});
    if (j.at("bias").get<bool>()) p.bias = std::vector<float>(static_cast<std::size_t>(out), 0.0f);
    p.stride = j.at("stride").get<int>();
    p.padding = j.at("padding").get<int>();
    p.groups = groups;
    if (p.stride < 1 || p.padding < 0) throw DataError("invalid conv stride/padding " + j.dump());
    return p;
}

json graph_to_json(const BranchGraph& g) {
    return std::visit(
        [](const auto& n) -> json {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, ConvNode>) {
                json j = conv_to_json(n.params);
                j["node"] = "conv";
                return j;
            } else if constexpr (std::is_same_v<T, SequentialNode>) {
                json c = json::array();
                for (const auto& ch : n.children) c.push_back(graph_to_json(ch));
                return {{"node", "sequential"}, {"children", c}};
            } else if constexpr (std::is_same_v<T, ParallelSumNode>) {
                json c = json::array();
                for (const auto& b : n.branches) c.push_back(graph_to_json(b));
                return {{"node", "parallel_sum"}, {"branches", c}};
            } else if constexpr (std::is_same_v<T, IdentityNode>) {
                return {{"node", "identity"}, {"channels", n.channels}};
            } else if constexpr (std::is_same_v<T, ChannelScaleNode>) {
                return {{"node", "channel_scale"}, {"channels", n.scale.size()}};
            } else if constexpr (std::is_same_v<T, FixedFilterNode>) {
                return {{"node", "fixed_filter"}, {"kind", std::string(to_string(n.kind))}, {"channels", n.scale.size()}};
            } else if constexpr (std::is_same_v<T, DualStreamNode>) {
                return {{"node", "dual_stream"},
                        {"k_b", conv_to_json(n.k_b)},
                        {"k_r2b", conv_to_json(n.k_r2b)},
                        {"k_b2r", conv_to_json(n.k_b2r)},
                        {"k_r", conv_to_json(n.k_r)}};
            } else {
                return {{"node", "activation"}, {"kind", std::string(to_string(n.kind))}};
            }
        },
        g.node);
}

std::vector<float> ones(const json& j) {
    const auto c = j.at("channels").get<std::int64_t>();
    if (c <= 0) throw DataError("non-positive channel count in " + j.dump());
    return std::vector<float>(static_cast<std::size_t>(c), 1.0f);
}

BranchGraph graph_from_json_node(const json& j) {
    const auto node = j.at("node").get<std::string>();
    if (node == "conv") return BranchGraph::conv(conv_from_json(j));
    if (node == "sequential" || node == "parallel_sum") {
        std::vector<BranchGraph> kids;
        for (const auto& c : j.at(node == "sequential" ? "children" : "branches")) kids.push_back(graph_from_json_node(c));
        return node == "sequential" ? BranchGraph::sequential(std::move(kids))
                                    : BranchGraph::parallel_sum(std::move(kids));
    }
    if (node == "identity") return BranchGraph::identity(j.at("channels").get<std::int64_t>());
    if (node == "channel_scale") return BranchGraph::channel_scale(ones(j));
    if (node == "fixed_filter") {
        return BranchGraph::fixed_filter(fixed_filter_from_string(j.at("kind").get<std::string>()), ones(j));
    }
    if (node == "dual_stream") {
        return BranchGraph::dual_stream(DualStreamNode{conv_from_json(j.at("k_b")), conv_from_json(j.at("k_r2b")),
                                                       conv_from_json(j.at("k_b2r")), conv_from_json(j.at("k_r"))});
    }
    if (node == "activation") return BranchGraph::activation(activation_from_string(j.at("kind").get<std::string>()));
    throw DataError("unknown branch node '" + node + "'");
}

json layer_to_json(const Layer& layer) {
    return std::visit(
        [](const auto& l) -> json {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, BlockLayer>) {
                return {{"type", "block"}, {"graph", graph_to_json(l.graph)}};
            } else if constexpr (std::is_same_v<T, ActivationLayer>) {
                return {{"type", "activation"}, {"kind", std::string(to_string(l.kind))}};
            } else if constexpr (std::is_same_v<T, ShuffleLayer>) {
                return {{"type", "pixel_shuffle"}, {"r", l.r}};
            } else if constexpr (std::is_same_v<T, UnshuffleLayer>) {
                return {{"type", "pixel_unshuffle"}, {"r", l.r}};
            } else if constexpr (std::is_same_v<T, SpabLayer>) {
                json c = json::array();
                for (const auto& g : l.convs) c.push_back(graph_to_json(g));
                return {{"type", "spab"},
                        {"convs", c},
                        {"act", std::string(to_string(l.act))},
                        {"attn", std::string(to_string(l.attn))}};
            } else if constexpr (std::is_same_v<T, SaveTapLayer>) {
                return {{"type", "save_tap"}, {"slot", l.slot}};
            } else if constexpr (std::is_same_v<T, ConcatTapsLayer>) {
                return {{"type", "concat_taps"}, {"slots", l.slots}};
            } else if constexpr (std::is_same_v<T, AnchorLayer>) {
                return {{"type", "anchor_residual"}, {"r", l.r}, {"slot", l.slot}};
            } else if constexpr (std::is_same_v<T, AddTapLayer>) {
                return {{"type", "add_tap"}, {"slot", l.slot}};
            } else {
                return {{"type", "aux_head"}, {"conv", graph_to_json(l.conv)}, {"r", l.r}};
            }
        },
        layer);
}

Layer layer_from_json(const json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "block") return BlockLayer{graph_from_json_node(j.at("graph"))};
    if (type == "activation") return ActivationLayer{activation_from_string(j.at("kind").get<std::string>())};
    if (type == "pixel_shuffle") return ShuffleLayer{j.at("r").get<int>()};
    if (type == "pixel_unshuffle") return UnshuffleLayer{j.at("r").get<int>()};
    if (type == "spab") {
        const auto& c = j.at("convs");
        if (c.size() != 3) throw DataError("spab layer needs exactly 3 convs");
        return SpabLayer{{graph_from_json_node(c[0]), graph_from_json_node(c[1]), graph_from_json_node(c[2])},
                         activation_from_string(j.at("act").get<std::string>()),
                         activation_from_string(j.at("attn").get<std::string>())};
    }
    if (type == "save_tap") return SaveTapLayer{j.at("slot").get<int>()};
    if (type == "concat_taps") return ConcatTapsLayer{j.at("slots").get<std::vector<int>>()};
    if (type == "anchor_residual") return AnchorLayer{j.at("r").get<int>(), j.at("slot").get<int>()};
    if (type == "add_tap") return AddTapLayer{j.at("slot").get<int>()};
    if (type == "aux_head") return AuxHeadLayer{graph_from_json_node(j.at("conv")), j.at("r").get<int>()};
    throw DataError("unknown layer type '" + type + "'");
}

}  // namespace

std::string spec_to_json(const ModelGraph& g) {
    json layers = json::array();
    for (const auto& l : g.spec.layers) layers.push_back(layer_to_json(l));
    const json j = {{"name", g.spec.name},
                    {"scale", g.spec.scale},
                    {"channels", g.spec.channels},
                    {"mandatory", g.spec.mandatory},
                    {"mode", std::string(to_string(g.mode))},
                    {"layers", layers}};
    return j.dump();
}

ModelGraph graph_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        ModelGraph g;
        g.spec.name = j.at("name").get<std::string>();
        g.spec.scale = j.at("scale").get<int>();
        g.spec.channels = j.at("channels").get<std::int64_t>();
        g.spec.mandatory = j.value("mandatory", true);
        const auto mode = j.value("mode", std::string("deploy"));
        if (mode != "train" && mode != "deploy") throw DataError("unknown mode '" + mode + "'");
        g.mode = mode == "train" ? Mode::train : Mode::deploy;
        for (const auto& l : j.at("layers")) g.spec.layers.push_back(layer_from_json(l));
        check_spec(g.spec);
        return g;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed model description: ") + e.what());
    } catch (const ShapeError& e) {
        throw DataError(std::string("inconsistent model description: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("malformed model description: ") + e.what());
    }
}

}  // namespace rtsr

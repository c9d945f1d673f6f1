#include "rtsr/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "rtsr/detail/model_eval.hpp"
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

struct Extent {
    std::int64_t channels = 0;
    std::int64_t num = 1;  // spatial gain num/den relative to the model input
    std::int64_t den = 1;

    void normalize() {
        const auto g = std::gcd(num, den);
        num /= g;
        den /= g;
    }
    bool same_spatial(const Extent& o) const { return num * o.den == o.num * den; }
};

[[noreturn]] void layer_error(std::size_t index, const std::string& what) {
    throw ShapeError("layer " + std::to_string(index) + ": " + what);
}

int block_stride(const BranchGraph& g) {
    if (const auto* c = std::get_if<ConvNode>(&g.node)) return c->params.stride;
    return 1;
}

void visit_layer_params(Layer& layer, const std::string& prefix, const ParamVisitor& fn) {
    std::visit(Overloaded{
                   [&](BlockLayer& l) { for_each_parameter(l.graph, prefix, fn); },
                   [&](SpabLayer& l) {
                       for (std::size_t j = 0; j < l.convs.size(); ++j)
                           for_each_parameter(l.convs[j], prefix + ".conv" + std::to_string(j), fn);
                   },
                   [&](AuxHeadLayer& l) { for_each_parameter(l.conv, prefix + ".aux", fn); },
                   [](auto&) {},
               },
               layer);
}

// Kaiming-uniform fan-in init. Summed branches share the gain so that a block's
// output variance does not grow with its branch count; linear layers inside a
// chain use the variance-preserving bound.
struct Initializer {
    std::mt19937_64 rng;
    bool randomize_all = false;

    void uniform(std::span<float> values, float bound) {
        std::uniform_real_distribution<float> u(-bound, bound);
        for (float& v : values) v = u(rng);
    }

    void conv(ConvParams& p, float gain) {
        const auto fan_in = p.weight.shape().c * p.kernel_h() * p.kernel_w();
        uniform(p.weight.data(), gain * std::sqrt(6.0f / static_cast<float>(fan_in)));
        if (p.bias) {
            if (randomize_all) {
                uniform(*p.bias, 0.2f);
            } else {
                std::fill(p.bias->begin(), p.bias->end(), 0.0f);
            }
        }
    }

    float scale_range() const { return randomize_all ? 1.0f : 0.1f; }

    void graph(BranchGraph& g, float gain) {
        std::visit(Overloaded{
                       [&](ConvNode& n) { conv(n.params, gain); },
                       [&](SequentialNode& n) {
                           for (std::size_t i = 0; i < n.children.size(); ++i)
                               graph(n.children[i], i + 1 == n.children.size() ? gain : std::sqrt(0.5f));
                       },
                       [&](ParallelSumNode& n) {
                           const float share = gain / std::sqrt(static_cast<float>(n.branches.size()));
                           for (auto& b : n.branches) graph(b, share);
                       },
                       [](IdentityNode&) {},
                       [&](ChannelScaleNode& n) { uniform(n.scale, gain * scale_range()); },
                       [&](FixedFilterNode& n) {
                           float norm = 0.0f;
                           for (float v : fixed_stencil(n.kind)) norm += v * v;
                           uniform(n.scale, gain * scale_range() / std::sqrt(norm));
                       },
                       [&](DualStreamNode& n) {
                           const float share = gain * std::sqrt(0.5f);
                           for (ConvParams* p : {&n.k_b, &n.k_r2b, &n.k_b2r, &n.k_r}) conv(*p, share);
                       },
                       [](ActivationNode&) {},
                   },
                   g.node);
    }
};

}  // namespace

std::string_view to_string(Mode mode) { return mode == Mode::train ? "train" : "deploy"; }

void check_spec(const ModelSpec& spec) {
    if (spec.scale < 1) throw ShapeError("model scale must be positive");
    if (spec.layers.empty()) throw ShapeError("model '" + spec.name + "' has no layers");
    Extent cur{3, 1, 1};
    std::map<int, Extent> taps;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const Layer& layer = spec.layers[i];
        auto expect_block = [&](const BranchGraph& g, std::int64_t in, const char* what) {
            try {
                validate(g);
            } catch (const ShapeError& e) {
                layer_error(i, e.what());
            }
            if (in_channels(g) != in) {
                layer_error(i, std::string(what) + " expects " + std::to_string(in_channels(g)) +
                                   " input channels but receives " + std::to_string(in));
            }
        };
        std::visit(Overloaded{
                       [&](const BlockLayer& l) {
                           expect_block(l.graph, cur.channels, "block");
                           cur.channels = out_channels(l.graph);
                           cur.den *= block_stride(l.graph);
                       },
                       [](const ActivationLayer&) {},
                       [&](const ShuffleLayer& l) {
                           if (l.r < 1 || cur.channels % (l.r * l.r) != 0) {
                               layer_error(i, "pixel_shuffle(" + std::to_string(l.r) + ") on " +
                                                  std::to_string(cur.channels) + " channels");
                           }
                           cur.channels /= l.r * l.r;
                           cur.num *= l.r;
                       },
                       [&](const UnshuffleLayer& l) {
                           if (l.r < 1) layer_error(i, "pixel_unshuffle factor must be positive");
                           cur.channels *= l.r * l.r;
                           cur.den *= l.r;
                       },
                       [&](const SpabLayer& l) {
                           for (const auto& c : l.convs) {
                               expect_block(c, cur.channels, "SPAB conv");
                               if (out_channels(c) != cur.channels) layer_error(i, "SPAB convs must preserve channels");
                               if (radius(c) != 1) layer_error(i, "SPAB convs must be 3x3");
                               if (block_stride(c) != 1) layer_error(i, "SPAB convs must have stride 1");
                           }
                       },
                       [&](const SaveTapLayer& l) { taps[l.slot] = cur; },
                       [&](const ConcatTapsLayer& l) {
                           if (l.slots.empty()) layer_error(i, "concat of no taps");
                           Extent out{0, 0, 0};
                           for (int s : l.slots) {
                               auto it = taps.find(s);
                               if (it == taps.end()) layer_error(i, "tap " + std::to_string(s) + " not written yet");
                               if (out.den == 0) {
                                   out = it->second;
                               } else {
                                   if (!out.same_spatial(it->second)) layer_error(i, "concat taps differ in resolution");
                                   out.channels += it->second.channels;
                               }
                           }
                           cur = out;
                       },
                       [&](const AnchorLayer& l) {
                           if (l.r < 1) layer_error(i, "anchor factor must be positive");
                           taps[l.slot] = Extent{3 * l.r * l.r, 1, 1};
                       },
                       [&](const AddTapLayer& l) {
                           auto it = taps.find(l.slot);
                           if (it == taps.end()) layer_error(i, "tap " + std::to_string(l.slot) + " not written yet");
                           if (it->second.channels != cur.channels || !it->second.same_spatial(cur)) {
                               layer_error(i, "residual tap shape does not match the running tensor");
                           }
                       },
                       [&](const AuxHeadLayer& l) {
                           expect_block(l.conv, cur.channels, "aux head");
                           if (out_channels(l.conv) != 3 * l.r * l.r) layer_error(i, "aux head must emit 3*r^2 channels");
                           if (cur.num * l.r * 2 != spec.scale * cur.den) {
                               layer_error(i, "aux head output is not at half the target resolution");
                           }
                       },
                   },
                   layer);
        cur.normalize();
    }
    if (cur.channels != 3) {
        throw ShapeError("layer " + std::to_string(spec.layers.size() - 1) + ": model emits " +
                         std::to_string(cur.channels) + " channels, expected 3");
    }
    if (cur.num != spec.scale * cur.den) {
        throw ShapeError("layer " + std::to_string(spec.layers.size() - 1) + ": net spatial gain " +
                         std::to_string(cur.num) + "/" + std::to_string(cur.den) + " differs from scale " +
                         std::to_string(spec.scale));
    }
}

int input_multiple(const ModelSpec& spec) {
    int m = 1;
    int factor = 1;
    for (const auto& layer : spec.layers) {
        if (const auto* u = std::get_if<UnshuffleLayer>(&layer)) factor *= u->r;
        if (const auto* s = std::get_if<ShuffleLayer>(&layer)) {
            factor = std::max(1, factor / s->r);
        }
        if (const auto* b = std::get_if<BlockLayer>(&layer)) factor *= block_stride(b->graph);
        m = std::lcm(m, factor);
    }
    return m;
}

ModelGraph build(const ModelSpec& spec, Mode mode, const InitOptions& init) {
    check_spec(spec);
    ModelGraph g{spec, Mode::train};
    Initializer ini{std::mt19937_64(init.seed), init.randomize_all};
    for (auto& layer : g.spec.layers) {
        std::visit(Overloaded{
                       [&](BlockLayer& l) { ini.graph(l.graph, 1.0f); },
                       [&](SpabLayer& l) {
                           for (auto& c : l.convs) ini.graph(c, 1.0f);
                       },
                       [&](AuxHeadLayer& l) { ini.graph(l.conv, 1.0f); },
                       [](auto&) {},
                   },
                   layer);
    }
    if (mode == Mode::deploy) return fuse(g);
    return g;
}

ModelGraph fuse(const ModelGraph& train) {
    ModelGraph out;
    out.spec.name = train.spec.name;
    out.spec.scale = train.spec.scale;
    out.spec.channels = train.spec.channels;
    out.spec.mandatory = train.spec.mandatory;
    out.mode = Mode::deploy;
    for (std::size_t i = 0; i < train.spec.layers.size(); ++i) {
        const Layer& layer = train.spec.layers[i];
        try {
            if (const auto* b = std::get_if<BlockLayer>(&layer)) {
                out.spec.layers.push_back(BlockLayer{BranchGraph::conv(lower_branch(b->graph))});
            } else if (const auto* s = std::get_if<SpabLayer>(&layer)) {
                SpabLayer fused = *s;
                for (auto& c : fused.convs) c = BranchGraph::conv(lower_branch(c));
                out.spec.layers.push_back(std::move(fused));
            } else if (std::holds_alternative<AuxHeadLayer>(layer)) {
                continue;
            } else {
                out.spec.layers.push_back(layer);
            }
        } catch (const ShapeError& e) {
            layer_error(i, e.what());
        }
    }
    return out;
}

bool is_deploy_form(const ModelGraph& g) {
    for (const auto& layer : g.spec.layers) {
        if (const auto* b = std::get_if<BlockLayer>(&layer); b && !b->graph.is_plain_conv()) return false;
        if (const auto* s = std::get_if<SpabLayer>(&layer)) {
            for (const auto& c : s->convs)
                if (!c.is_plain_conv()) return false;
        }
        if (std::holds_alternative<AuxHeadLayer>(layer)) return false;
    }
    return true;
}

ForwardOutput forward_with_aux(const ModelGraph& g, const Tensor& lr) {
    const Shape& s = lr.shape();
    if (s.c != 3) throw ShapeError("model input must have 3 channels, got " + to_string(s));
    const int m = input_multiple(g.spec);
    if (s.h % m != 0 || s.w % m != 0) {
        throw ShapeError("input " + to_string(s) + " not divisible by " + std::to_string(m) + " required by '" +
                         g.spec.name + "'");
    }
    detail::TensorExec ex;
    std::optional<Tensor> aux;
    Tensor sr = detail::eval_model(ex, g, lr, &aux);
    return {std::move(sr), std::move(aux)};
}

Tensor forward(const ModelGraph& g, const Tensor& lr) { return forward_with_aux(g, lr).sr; }

Tensor spab_forward(const Tensor& o_prev, const ConvParams& w1, const ConvParams& w2, const ConvParams& w3,
                    ActivationKind act, ActivationKind attn) {
    const auto c = o_prev.shape().c;
    for (const ConvParams* w : {&w1, &w2, &w3}) {
        if (w->in_channels() != c || w->out_channels() != c) {
            throw ShapeError("SPAB conv " + std::to_string(w->in_channels()) + "->" + std::to_string(w->out_channels()) +
                             " does not preserve " + std::to_string(c) + " channels");
        }
    }
    const Tensor h = conv2d(activation_apply(conv2d(activation_apply(conv2d(o_prev, w1), act), w2), act), w3);
    return mul(add(o_prev, h), activation_apply(h, attn));
}

Tensor anchor_residual(const Tensor& lr, int r) {
    if (lr.shape().c != 3) throw ShapeError("anchor residual needs a 3-channel image, got " + to_string(lr.shape()));
    if (r < 1) throw ShapeError("anchor factor must be positive");
    return repeat_channels(lr, r * r);
}

std::int64_t parameter_count(const ModelGraph& g) {
    std::int64_t n = 0;
    for (const auto& layer : g.spec.layers) {
        std::visit(Overloaded{
                       [&](const BlockLayer& l) { n += parameter_count(l.graph); },
                       [&](const SpabLayer& l) {
                           for (const auto& c : l.convs) n += parameter_count(c);
                       },
                       [&](const AuxHeadLayer& l) { n += parameter_count(l.conv); },
                       [](const auto&) {},
                   },
                   layer);
    }
    return n;
}

int conv_layer_count(const ModelGraph& g) {
    int n = 0;
    for (const auto& layer : g.spec.layers) {
        if (std::holds_alternative<BlockLayer>(layer) || std::holds_alternative<AuxHeadLayer>(layer)) ++n;
        if (std::holds_alternative<SpabLayer>(layer)) n += 3;
    }
    return n;
}

void for_each_parameter(ModelGraph& g, const ParamVisitor& fn) {
    for (std::size_t i = 0; i < g.spec.layers.size(); ++i) visit_layer_params(g.spec.layers[i], "layers." + std::to_string(i), fn);
}

void strip_bias(ModelGraph& g) {
    for (auto& layer : g.spec.layers) {
        std::visit(Overloaded{
                       [](BlockLayer& l) { strip_bias(l.graph); },
                       [](SpabLayer& l) {
                           for (auto& c : l.convs) strip_bias(c);
                       },
                       [](AuxHeadLayer& l) { strip_bias(l.conv); },
                       [](auto&) {},
                   },
                   layer);
    }
}

bool any_bias(const ModelGraph& g) {
    bool found = false;
    auto& mutable_g = const_cast<ModelGraph&>(g);  // visitor only reads names
    for_each_parameter(mutable_g, [&](const std::string& name, std::span<float>, const std::vector<std::int64_t>&) {
        if (name.size() >= 5 && name.compare(name.size() - 5, 5, ".bias") == 0) found = true;
    });
    return found;
}

float max_train_deploy_error(const ModelGraph& train, const ModelGraph& deploy, int trials, std::int64_t size,
                             std::uint64_t seed) {
    const int m = input_multiple(train.spec);
    const std::int64_t side = ((size + m - 1) / m) * m;
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    float err = 0.0f;
    for (int t = 0; t < trials; ++t) {
        Tensor x({1, 3, side, side});
        for (float& v : x.data()) v = normal(rng);
        err = std::max(err, max_abs_diff(forward(train, x), forward(deploy, x)));
    }
    return err;
}

}  // namespace rtsr

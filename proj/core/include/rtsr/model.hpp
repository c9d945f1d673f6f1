#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rtsr/reparam.hpp"

namespace rtsr {

enum class Mode { train, deploy };

std::string_view to_string(Mode mode);

/// A convolution or a re-parameterisable block. Deploy form holds a plain ConvNode.
struct BlockLayer {
    BranchGraph graph;
};
struct ActivationLayer {
    ActivationKind kind = ActivationKind::relu;
};
struct ShuffleLayer {
    int r = 1;
};
struct UnshuffleLayer {
    int r = 1;
};
/// Swift parameter-free attention block:
///   H = W3 * act(W2 * act(W1 * O)),  out = (O + H) . attn(H)
struct SpabLayer {
    std::array<BranchGraph, 3> convs;
    ActivationKind act = ActivationKind::relu;
    ActivationKind attn = ActivationKind::sigmoid_centered;
};
struct SaveTapLayer {
    int slot = 0;
};
/// Replaces the running tensor with the channel concat of the listed taps.
struct ConcatTapsLayer {
    std::vector<int> slots;
};
/// Stores the model input with every channel repeated r*r times.
struct AnchorLayer {
    int r = 4;
    int slot = 0;
};
struct AddTapLayer {
    int slot = 0;
};
/// Training-only side output: shuffle(conv(x), r). Dropped from deploy graphs.
struct AuxHeadLayer {
    BranchGraph conv;
    int r = 2;
};

using Layer = std::variant<BlockLayer, ActivationLayer, ShuffleLayer, UnshuffleLayer, SpabLayer, SaveTapLayer,
                           ConcatTapsLayer, AnchorLayer, AddTapLayer, AuxHeadLayer>;

struct ModelSpec {
    std::string name;
    int scale = 4;
    std::int64_t channels = 16;  // feature width
    bool mandatory = true;
    std::vector<Layer> layers;
};

struct ModelGraph {
    ModelSpec spec;
    Mode mode = Mode::train;
};

struct InitOptions {
    std::uint64_t seed = 0;
    /// Draw biases and branch scales from wide ranges instead of the training init.
    bool randomize_all = false;
};

/// Throws ShapeError naming the offending layer index when the layer chain does not
/// map a 3-channel image to a 3-channel image scale times larger.
void check_spec(const ModelSpec& spec);

/// Spatial multiple the input must honour (product of unshuffle factors and strides).
int input_multiple(const ModelSpec& spec);

/// Train mode: Kaiming-uniform weights, zero biases. Deploy mode: the train graph lowered.
ModelGraph build(const ModelSpec& spec, Mode mode, const InitOptions& init = {});

/// Lowers every block to a single conv and drops auxiliary heads.
ModelGraph fuse(const ModelGraph& train);

bool is_deploy_form(const ModelGraph& g);

struct ForwardOutput {
    Tensor sr;
    std::optional<Tensor> aux;
};

Tensor forward(const ModelGraph& g, const Tensor& lr);
ForwardOutput forward_with_aux(const ModelGraph& g, const Tensor& lr);

Tensor spab_forward(const Tensor& o_prev, const ConvParams& w1, const ConvParams& w2, const ConvParams& w3,
                    ActivationKind act, ActivationKind attn);

/// Repeats each RGB channel r*r times; pixel_shuffle(anchor, r) is nearest-neighbour x r.
Tensor anchor_residual(const Tensor& lr, int r);

std::int64_t parameter_count(const ModelGraph& g);
/// Number of weight-bearing layers (blocks, SPAB convs, aux heads).
int conv_layer_count(const ModelGraph& g);

void for_each_parameter(ModelGraph& g, const ParamVisitor& fn);
void strip_bias(ModelGraph& g);
bool any_bias(const ModelGraph& g);

/// Max abs difference between train and deploy forwards over random inputs.
float max_train_deploy_error(const ModelGraph& train, const ModelGraph& deploy, int trials, std::int64_t size,
                             std::uint64_t seed);

// Catalog of the challenge micro-architectures.
std::vector<ModelSpec> zoo_catalog();
ModelSpec zoo_spec(const std::string& name);
std::vector<std::string> zoo_names();

ModelSpec reptcn_spec(std::int64_t channels = 16);
/// SPAN-micro with a configurable number of SPABs (at least 1).
ModelSpec span_micro_spec(int spab_blocks = 2, std::int64_t channels = 12);
/// Inserts a x2 auxiliary head in front of the final block (for scale-4 models whose
/// last block runs at input resolution).
ModelSpec with_aux_head(ModelSpec spec);

/// Layer-structure (weights excluded) serialisation used by weight files.
std::string spec_to_json(const ModelGraph& g);
ModelGraph graph_from_json(const std::string& text);

}  // namespace rtsr

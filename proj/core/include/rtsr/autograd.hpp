#pragma once

#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "rtsr/model.hpp"

namespace rtsr {

/// Handle to a value recorded on a Tape.
struct Var {
    std::int32_t id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over the tensor op set. Parameters are read by reference and
/// their gradients are keyed by the address of their storage, so the parameter
/// objects must stay alive and unmoved between recording and backward().
class Tape {
public:
    Var leaf(Tensor value);
    const Tensor& value(Var v) const;
    std::size_t size() const { return values_.size(); }

    Var conv(Var x, const ConvParams& p, int padding);
    Var fixed_filter(Var x, FixedFilterKind kind, const std::vector<float>& scale);
    Var channel_scale(Var x, const std::vector<float>& scale);
    Var act(Var x, ActivationKind kind);
    Var add(Var a, Var b);
    Var mul(Var a, Var b);
    Var concat(const std::vector<Var>& parts);
    Var slice(Var x, std::int64_t begin, std::int64_t end);
    Var pad(Var x, int p);
    Var crop(Var x, int p);
    Var shuffle(Var x, int r);
    Var unshuffle(Var x, int r);
    Var repeat(Var x, int times);

    /// Propagates `seed` (d loss / d out) back through every recorded op.
    void backward(Var out, const Tensor& seed);
    /// Same, for several outputs that feed one scalar loss.
    void backward(const std::vector<std::pair<Var, Tensor>>& seeds);

    /// Gradient of a recorded value; throws if backward has not reached it.
    const Tensor& grad(Var v) const;
    /// Gradient of a parameter identified by its storage; empty when untouched.
    std::span<const float> param_grad(const float* storage) const;

    void clear();

private:
    using Backward = std::function<void(const Tensor& g)>;
    Var push(Tensor value, Backward back);
    void accumulate(Var v, const Tensor& g);
    void accumulate_param(const float* key, std::span<const float> g);

    std::vector<Tensor> values_;
    std::vector<Backward> backward_;
    std::vector<std::optional<Tensor>> grads_;
    std::unordered_map<const float*, std::vector<float>> param_grads_;
};

/// Records a model forward on the tape. `aux` receives the auxiliary head output
/// when the graph has one and is in train mode.
Var forward_on_tape(Tape& tape, const ModelGraph& g, Var input, std::optional<Var>* aux = nullptr);

namespace detail {

struct TapeExec {
    using Value = Var;
    Tape& tape;

    Var conv(Var x, const ConvParams& p, int padding) { return tape.conv(x, p, padding); }
    Var fixed_filter(Var x, FixedFilterKind k, const std::vector<float>& s) { return tape.fixed_filter(x, k, s); }
    Var channel_scale(Var x, const std::vector<float>& s) { return tape.channel_scale(x, s); }
    Var act(Var x, ActivationKind k) { return tape.act(x, k); }
    Var add(Var a, Var b) { return tape.add(a, b); }
    Var mul(Var a, Var b) { return tape.mul(a, b); }
    Var concat(const std::vector<Var>& parts) { return tape.concat(parts); }
    Var slice(Var x, std::int64_t b, std::int64_t e) { return tape.slice(x, b, e); }
    Var pad(Var x, int p) { return tape.pad(x, p); }
    Var crop(Var x, int p) { return tape.crop(x, p); }
    Var shuffle(Var x, int r) { return tape.shuffle(x, r); }
    Var unshuffle(Var x, int r) { return tape.unshuffle(x, r); }
    Var repeat(Var x, int t) { return tape.repeat(x, t); }
};

}  // namespace detail

}  // namespace rtsr

#pragma once

#include <map>
#include <optional>

#include "rtsr/detail/graph_eval.hpp"
#include "rtsr/model.hpp"

namespace rtsr::detail {

template <class Exec>
typename Exec::Value eval_model(Exec& ex, const ModelGraph& g, const typename Exec::Value& input,
                                std::optional<typename Exec::Value>* aux) {
    using Value = typename Exec::Value;
    Value cur = input;
    std::map<int, Value> taps;
    auto tap = [&](int slot) -> const Value& {
        auto it = taps.find(slot);
        if (it == taps.end()) throw ShapeError("tap slot " + std::to_string(slot) + " read before being written");
        return it->second;
    };
    for (const auto& layer : g.spec.layers) {
        std::visit(
            [&](const auto& l) {
                using T = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<T, BlockLayer>) {
                    cur = eval_block(ex, l.graph, cur);
                } else if constexpr (std::is_same_v<T, ActivationLayer>) {
                    cur = ex.act(cur, l.kind);
                } else if constexpr (std::is_same_v<T, ShuffleLayer>) {
                    cur = ex.shuffle(cur, l.r);
                } else if constexpr (std::is_same_v<T, UnshuffleLayer>) {
                    cur = ex.unshuffle(cur, l.r);
                } else if constexpr (std::is_same_v<T, SpabLayer>) {
                    Value h = eval_block(ex, l.convs[0], cur);
                    h = eval_block(ex, l.convs[1], ex.act(h, l.act));
                    h = eval_block(ex, l.convs[2], ex.act(h, l.act));
                    cur = ex.mul(ex.add(cur, h), ex.act(h, l.attn));
                } else if constexpr (std::is_same_v<T, SaveTapLayer>) {
                    taps.insert_or_assign(l.slot, cur);
                } else if constexpr (std::is_same_v<T, ConcatTapsLayer>) {
                    std::vector<Value> parts;
                    for (int s : l.slots) parts.push_back(tap(s));
                    cur = ex.concat(parts);
                } else if constexpr (std::is_same_v<T, AnchorLayer>) {
                    taps.insert_or_assign(l.slot, ex.repeat(input, l.r * l.r));
                } else if constexpr (std::is_same_v<T, AddTapLayer>) {
                    cur = ex.add(cur, tap(l.slot));
                } else if constexpr (std::is_same_v<T, AuxHeadLayer>) {
                    if (g.mode == Mode::train && aux != nullptr) *aux = ex.shuffle(eval_block(ex, l.conv, cur), l.r);
                }
            },
            layer);
    }
    return cur;
}

}  // namespace rtsr::detail

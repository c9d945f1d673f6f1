#pragma once

#include <vector>

#include "rtsr/ops.hpp"
#include "rtsr/reparam.hpp"

namespace rtsr::detail {

Tensor fixed_filter_valid(const Tensor& x, FixedFilterKind kind, const std::vector<float>& scale);

/// Plain inference executor over tensors.
struct TensorExec {
    using Value = Tensor;

    Tensor conv(const Tensor& x, const ConvParams& p, int padding) { return conv2d(x, p, padding); }
    Tensor fixed_filter(const Tensor& x, FixedFilterKind k, const std::vector<float>& s) {
        return fixed_filter_valid(x, k, s);
    }
    Tensor channel_scale(const Tensor& x, const std::vector<float>& s) { return rtsr::channel_scale(x, s); }
    Tensor act(const Tensor& x, ActivationKind k) { return activation_apply(x, k); }
    Tensor add(const Tensor& a, const Tensor& b) { return rtsr::add(a, b); }
    Tensor mul(const Tensor& a, const Tensor& b) { return rtsr::mul(a, b); }
    Tensor concat(const std::vector<Tensor>& parts) { return concat_channels(parts); }
    Tensor slice(const Tensor& x, std::int64_t b, std::int64_t e) { return slice_channels(x, b, e); }
    Tensor pad(const Tensor& x, int p) { return pad_zero(x, p); }
    Tensor crop(const Tensor& x, int p) { return rtsr::crop(x, p); }
    Tensor shuffle(const Tensor& x, int r) { return pixel_shuffle(x, r); }
    Tensor unshuffle(const Tensor& x, int r) { return pixel_unshuffle(x, r); }
    Tensor repeat(const Tensor& x, int t) { return repeat_channels(x, t); }
};

}  // namespace rtsr::detail

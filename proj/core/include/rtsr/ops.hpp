#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rtsr/tensor.hpp"

namespace rtsr {

/// Convolution weights plus geometry. Weight shape is (out, in / groups, kh, kw).
struct ConvParams {
    Tensor weight;
    std::optional<std::vector<float>> bias;
    int stride = 1;
    int padding = 0;
    int groups = 1;

    std::int64_t out_channels() const { return weight.shape().n; }
    std::int64_t in_channels() const { return weight.shape().c * groups; }
    std::int64_t kernel_h() const { return weight.shape().h; }
    std::int64_t kernel_w() const { return weight.shape().w; }
    std::int64_t parameter_count() const {
        return weight.numel() + (bias ? static_cast<std::int64_t>(bias->size()) : 0);
    }

    /// Zero-initialised conv with "same" padding for odd kernels.
    static ConvParams make(std::int64_t in, std::int64_t out, int k, bool with_bias, int stride = 1,
                           int groups = 1);
};

enum class ActivationKind { relu, gelu_tanh_approx, sigmoid, identity, sigmoid_centered };

std::string_view to_string(ActivationKind kind);
ActivationKind activation_from_string(std::string_view name);

enum class ElementwiseOp { add, mul };

/// Cross-correlation with zero padding.
Tensor conv2d(const Tensor& input, const ConvParams& params);
/// Same as conv2d but ignores params.padding in favour of `padding`.
Tensor conv2d(const Tensor& input, const ConvParams& params, int padding);

/// Adjoint of conv2d with respect to its input.
Tensor conv2d_backward_input(const Tensor& grad_out, const ConvParams& params, int padding, const Shape& input_shape);

struct ConvGrads {
    Tensor weight;
    std::vector<float> bias;  // empty when params has no bias
};
/// Gradients of conv2d with respect to weight and bias, accumulated in double.
ConvGrads conv2d_backward_params(const Tensor& input, const Tensor& grad_out, const ConvParams& params, int padding);

Tensor pixel_shuffle(const Tensor& input, int r);
Tensor pixel_unshuffle(const Tensor& input, int r);

float activation_scalar(float x, ActivationKind kind);
/// d activation / dx evaluated at the pre-activation value x.
float activation_derivative(float x, ActivationKind kind);
Tensor activation_apply(const Tensor& input, ActivationKind kind);

Tensor elementwise(const Tensor& a, const Tensor& b, ElementwiseOp op);
inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::add); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, ElementwiseOp::mul); }

Tensor concat_channels(std::span<const Tensor> parts);
Tensor slice_channels(const Tensor& input, std::int64_t begin, std::int64_t end);

/// Symmetric zero padding / cropping of the spatial axes.
Tensor pad_zero(const Tensor& input, int p);
Tensor crop(const Tensor& input, int p);

/// Multiplies channel c by scale[c].
Tensor channel_scale(const Tensor& input, std::span<const float> scale);

/// Repeats every channel `times` times contiguously (c0 x times, c1 x times, ...).
Tensor repeat_channels(const Tensor& input, int times);

/// Output spatial extent of a convolution, or 0 when the window does not fit.
std::int64_t conv_out_extent(std::int64_t in, std::int64_t k, int stride, int padding);

}  // namespace rtsr

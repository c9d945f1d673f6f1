#pragma once

#include <optional>

#include "rtsr/tensor.hpp"

namespace rtsr {

enum class ResampleKind { lanczos, bicubic_catmull_rom, nearest };

struct ResampleKernel {
    ResampleKind kind = ResampleKind::lanczos;
    int a = 3;  // lanczos window radius

    static ResampleKernel lanczos(int window) { return {ResampleKind::lanczos, window}; }
    static ResampleKernel bicubic() { return {ResampleKind::bicubic_catmull_rom, 2}; }
    static ResampleKernel nearest() { return {ResampleKind::nearest, 1}; }

    /// Half-width of the kernel support in source pixels at unit scale.
    double support() const;
    double weight(double x) const;
};

/// Window used for challenge LR generation and for the upsampling baseline.
inline constexpr int kDegradeLanczosWindow = 5;
inline constexpr int kBaselineLanczosWindow = 3;

inline constexpr int kChallengeQps[] = {31, 39, 47, 55, 63};

bool is_challenge_qp(int qp);

struct DegradationSpec {
    int scale = 4;
    ResampleKernel kernel = ResampleKernel::lanczos(kDegradeLanczosWindow);
    std::optional<int> qp;
};

/// Lossy round trip through an image codec at a given quantiser.
class ImageCodec {
public:
    virtual ~ImageCodec() = default;
    virtual Tensor roundtrip(const Tensor& img, int qp) = 0;
};

/// sinc(x) * sinc(x / a) on |x| < a, zero elsewhere.
double lanczos_weight(double x, int a);

/// Separable resampling with pixel-centre alignment and edge clamping.
Tensor resample_image(const Tensor& img, std::int64_t out_h, std::int64_t out_w, const ResampleKernel& kernel);

/// Downscale by ceil division, optionally pass through a codec, clamp to [0, 1].
Tensor degrade(const Tensor& img, const DegradationSpec& spec, ImageCodec* codec = nullptr);

Tensor nearest_upsample(const Tensor& img, int r);

/// Lanczos (a = 3) upscale used as the quality reference every model must beat.
Tensor baseline_upsample(const Tensor& lr, int scale);

}  // namespace rtsr

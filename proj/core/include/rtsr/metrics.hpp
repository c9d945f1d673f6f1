#pragma once

#include <map>

#include "rtsr/tensor.hpp"

namespace rtsr {

/// BT.601 limited-range luma, one channel, in [16/255, 235/255] for inputs in [0, 1].
Tensor to_luma(const Tensor& img);

/// 10 log10(peak^2 / MSE) after clamping both inputs to [0, peak]. Identical inputs
/// give +infinity.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

/// Gaussian-window SSIM (11x11, sigma 1.5), averaged over valid window positions and
/// then over channels and batch items.
double ssim(const Tensor& a, const Tensor& b, double peak = 1.0);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

struct ImageMetrics {
    double psnr_rgb = 0.0;
    double psnr_y = 0.0;
    double ssim_rgb = 0.0;
    double ssim_y = 0.0;
};

ImageMetrics evaluate_pair(const Tensor& sr, const Tensor& hr);

/// Keyed by QP.
using MetricsReport = std::map<int, ImageMetrics>;

struct QpPair {
    double qp31 = 0.0;
    double qp63 = 0.0;
};

/// Mean model PSNR-Y over QP31 and QP63 minus the same mean for the baseline.
double delta_psnr(const QpPair& model_psnr_y, const QpPair& baseline_psnr_y);

struct ScoreInputs {
    double delta_db = 0.0;
    double runtime_ms = 1.0;
    double c = 0.1;
};

/// S = 2 * 2^delta / (sqrt(T) * C). Throws UsageError for non-positive T or C.
double challenge_score(const ScoreInputs& in);

}  // namespace rtsr

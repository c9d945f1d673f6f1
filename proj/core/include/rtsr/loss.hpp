#pragma once

#include <map>
#include <optional>
#include <string>

#include "rtsr/tensor.hpp"

namespace rtsr {

/// Weighted loss terms. The default is the combined objective
/// alpha*L1 + gamma*L_GM + delta*L_FFT with alpha = 1, gamma = delta = 0.1.
struct LossConfig {
    double l1 = 1.0;            // alpha
    double gradient_map = 0.1;  // gamma
    double fft_l1 = 0.1;        // delta
    double mse = 0.0;
    double distill_mse = 0.0;
    double aux_x2 = 0.0;

    static LossConfig l1_only() { return {1.0, 0.0, 0.0, 0.0, 0.0, 0.0}; }

    /// Throws UsageError on negative weights or when every weight is zero.
    void validate() const;
};

struct LossExtras {
    const Tensor* teacher_sr = nullptr;
    const Tensor* aux_sr2 = nullptr;
    const Tensor* hr2 = nullptr;
};

struct TermValue {
    double value = 0.0;
    Tensor grad;  // d value / d first argument
};

struct LossResult {
    double total = 0.0;
    std::map<std::string, double> terms;  // unweighted values of the active terms
    Tensor grad_sr;
    std::optional<Tensor> grad_aux;
};

/// Mean absolute error. The subgradient at zero difference is 0.
TermValue l1_loss(const Tensor& a, const Tensor& b);
TermValue mse_loss(const Tensor& a, const Tensor& b);
/// Mean over all real and imaginary parts of |DFT2(a) - DFT2(b)|, per (n, c) plane.
TermValue fft_l1_loss(const Tensor& a, const Tensor& b);
/// L1 distance between Sobel gradient-magnitude maps sqrt(gx^2 + gy^2 + eps).
TermValue gradient_map_loss(const Tensor& a, const Tensor& b);

/// Per-channel Sobel gradient magnitude with zero padding.
Tensor gradient_magnitude(const Tensor& img);

/// The x2 target for the auxiliary head: Lanczos (a = 3) half-resolution HR.
Tensor half_resolution(const Tensor& hr);

LossResult loss_eval(const Tensor& sr, const Tensor& hr, const LossConfig& cfg, const LossExtras& extras = {});

}  // namespace rtsr

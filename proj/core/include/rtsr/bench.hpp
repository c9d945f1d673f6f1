#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rtsr/metrics.hpp"
#include "rtsr/model.hpp"

namespace rtsr {

inline constexpr const char* kBaselineModelName = "lanczos_baseline";

struct RunConfig {
    /// A weight file, or a zoo name (random init; useful for timing only).
    std::string model;
    /// Manifest file or prepared dataset directory.
    std::filesystem::path manifest;
    std::vector<int> qps;  // empty: every QP in the manifest
    int warmup = 10;
    int runs = 100;
    int threads = 1;
    bool with_baseline = true;
    /// Baseline PSNR-Y supplied from elsewhere; computed in the run when absent.
    std::optional<QpPair> baseline_psnr_y;
    double score_c = 0.1;

    void validate() const;
};

struct RuntimeStats {
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;

    friend bool operator==(const RuntimeStats&, const RuntimeStats&) = default;
};

struct ReportRow {
    std::string model;
    int qp = 0;
    double psnr_rgb = 0.0;
    double psnr_y = 0.0;
    double ssim_rgb = 0.0;
    double ssim_y = 0.0;
    RuntimeStats runtime;
    double params_m = 0.0;
    std::optional<double> delta_db;
    std::optional<double> score;

    friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

/// Monotonic milliseconds.
using Clock = std::function<double()>;
Clock steady_clock_ms();

/// Mean, and nearest-rank 50th and 95th percentiles.
RuntimeStats summarize(const std::vector<double>& samples_ms);

/// Something that turns an LR image into an SR image.
struct Upscaler {
    std::string name;
    std::int64_t params = 0;
    int input_multiple = 1;
    std::function<Tensor(const Tensor&)> run;
};

Upscaler model_upscaler(const ModelGraph& g);
Upscaler baseline_upscaler(int scale);

/// Per pair: `warmup` untimed and `runs` timed forwards, then metrics against the HR.
/// The LR is edge-padded to the model's input multiple and the SR cropped to the HR size.
/// `samples` (optional) receives every timed sample in order.
std::vector<ReportRow> benchmark_upscaler(const Upscaler& up, const RunConfig& cfg, const Clock& clock,
                                          std::vector<double>* samples = nullptr);

/// Benchmarks the configured model and, when requested, the Lanczos baseline. Every row
/// of the model gets delta and score once PSNR-Y for QP31 and QP63 is known; baseline
/// rows carry delta 0 and no score.
std::vector<ReportRow> run_benchmark(const RunConfig& cfg, const Clock& clock = steady_clock_ms());

/// Resolves a weight file path or zoo name.
ModelGraph resolve_model(const std::string& id);

}  // namespace rtsr

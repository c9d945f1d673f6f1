#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rtsr {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam. Moment buffers are keyed by parameter name.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    /// Advances the shared step counter; call once before the updates of a step.
    void begin_step() { ++step_; }
    /// An empty gradient span counts as a zero gradient.
    void update(const std::string& name, std::span<float> values, std::span<const float> grad, double lr);

    std::int64_t step() const { return step_; }
    const AdamConfig& config() const { return cfg_; }

private:
    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
    };
    AdamConfig cfg_;
    std::int64_t step_ = 0;
    std::map<std::string, Moments> state_;
};

enum class ScheduleKind { constant, cosine, cosine_warmup, multistep };

std::string_view to_string(ScheduleKind kind);
ScheduleKind schedule_from_string(std::string_view name);

struct Schedule {
    ScheduleKind kind = ScheduleKind::cosine;
    double lr_max = 5e-4;
    double lr_min = 1e-7;
    double warmup_fraction = 0.0;
    std::vector<std::int64_t> milestones;  // multistep: halve at each milestone
    std::int64_t total = 1;
};

/// Learning rate at `step` in [0, total].
double lr_at(const Schedule& s, std::int64_t step);

}  // namespace rtsr

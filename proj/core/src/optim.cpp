#include "rtsr/optim.hpp"

#include <cmath>
#include <numbers>

#include "rtsr/errors.hpp"

namespace rtsr {

void Adam::update(const std::string& name, std::span<float> values, std::span<const float> grad, double lr) {
    if (step_ < 1) throw UsageError("Adam::update called before begin_step");
    if (!grad.empty() && grad.size() != values.size()) {
        throw ShapeError("gradient for '" + name + "' has " + std::to_string(grad.size()) + " entries, parameter has " +
                         std::to_string(values.size()));
    }
    auto& st = state_[name];
    if (st.m.empty()) {
        st.m.assign(values.size(), 0.0);
        st.v.assign(values.size(), 0.0);
    } else if (st.m.size() != values.size()) {
        throw ShapeError("parameter '" + name + "' changed size between steps");
    }
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double g = grad.empty() ? 0.0 : grad[i];
        st.m[i] = cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * g;
        st.v[i] = cfg_.beta2 * st.v[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = st.m[i] / c1;
        const double vhat = st.v[i] / c2;
        values[i] = static_cast<float>(values[i] - lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
}

std::string_view to_string(ScheduleKind kind) {
    switch (kind) {
        case ScheduleKind::constant: return "constant";
        case ScheduleKind::cosine: return "cosine";
        case ScheduleKind::cosine_warmup: return "cosine_warmup";
        case ScheduleKind::multistep: return "multistep";
    }
    return "cosine";
}

ScheduleKind schedule_from_string(std::string_view name) {
    if (name == "constant") return ScheduleKind::constant;
    if (name == "cosine") return ScheduleKind::cosine;
    if (name == "cosine_warmup") return ScheduleKind::cosine_warmup;
    if (name == "multistep") return ScheduleKind::multistep;
    throw UsageError("unknown schedule '" + std::string(name) + "'");
}

double lr_at(const Schedule& s, std::int64_t step) {
    if (s.total < 1) throw UsageError("schedule total must be at least 1");
    if (step < 0 || step > s.total) {
        throw UsageError("step " + std::to_string(step) + " outside [0, " + std::to_string(s.total) + "]");
    }
    auto cosine = [&](double t) { return s.lr_min + 0.5 * (s.lr_max - s.lr_min) * (1.0 + std::cos(std::numbers::pi * t)); };
    switch (s.kind) {
        case ScheduleKind::constant: return s.lr_max;
        case ScheduleKind::cosine:
            if (step == s.total) return s.lr_min;
            return cosine(static_cast<double>(step) / static_cast<double>(s.total));
        case ScheduleKind::cosine_warmup: {
            if (s.warmup_fraction < 0.0 || s.warmup_fraction > 1.0) throw UsageError("warmup fraction outside [0, 1]");
            const auto warm = static_cast<std::int64_t>(std::llround(s.warmup_fraction * static_cast<double>(s.total)));
            if (step < warm) return s.lr_max * static_cast<double>(step) / static_cast<double>(warm);
            if (step == s.total || warm == s.total) return s.lr_min;
            return cosine(static_cast<double>(step - warm) / static_cast<double>(s.total - warm));
        }
        case ScheduleKind::multistep: {
            double lr = s.lr_max;
            for (auto m : s.milestones)
                if (m <= step) lr *= 0.5;
            return lr;
        }
    }
    return s.lr_max;
}

}  // namespace rtsr

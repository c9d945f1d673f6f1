#include "rtsr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "rtsr/autograd.hpp"
#include "rtsr/errors.hpp"

namespace rtsr {

using nlohmann::json;

namespace {

struct Rgb {
    float r, g, b;
};

Rgb random_color(std::mt19937_64& rng) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    return {u(rng), u(rng), u(rng)};
}

// Coverage-weighted blend of a colour into the image using 4x4 supersampling.
template <class Inside>
void paint(Tensor& img, const Rgb& col, float alpha, Inside inside) {
    const Shape& s = img.shape();
    constexpr int kSub = 4;
    for (std::int64_t y = 0; y < s.h; ++y)
        for (std::int64_t x = 0; x < s.w; ++x) {
            int hits = 0;
            for (int sy = 0; sy < kSub; ++sy)
                for (int sx = 0; sx < kSub; ++sx) {
                    const double py = static_cast<double>(y) + (sy + 0.5) / kSub;
                    const double px = static_cast<double>(x) + (sx + 0.5) / kSub;
                    hits += inside(py, px) ? 1 : 0;
                }
            if (hits == 0) continue;
            const float a = alpha * static_cast<float>(hits) / (kSub * kSub);
            const float c[3] = {col.r, col.g, col.b};
            for (int ch = 0; ch < 3; ++ch) {
                float& v = img.at(0, ch, y, x);
                v = (1.0f - a) * v + a * c[ch];
            }
        }
}

}  // namespace

Tensor synthetic_texture(std::int64_t h, std::int64_t w, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor img({1, 3, h, w});
    const Rgb c0 = random_color(rng);
    const Rgb c1 = random_color(rng);
    const double ang = u(rng) * 2.0 * std::numbers::pi;
    const double dx = std::cos(ang);
    const double dy = std::sin(ang);
    const double span = std::abs(dx) * static_cast<double>(w) + std::abs(dy) * static_cast<double>(h);
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            double t = (dx * static_cast<double>(x) + dy * static_cast<double>(y)) / std::max(span, 1.0);
            t = t - std::floor(t);
            img.at(0, 0, y, x) = static_cast<float>(c0.r + (c1.r - c0.r) * t);
            img.at(0, 1, y, x) = static_cast<float>(c0.g + (c1.g - c0.g) * t);
            img.at(0, 2, y, x) = static_cast<float>(c0.b + (c1.b - c0.b) * t);
        }

    const auto fh = static_cast<double>(h);
    const auto fw = static_cast<double>(w);
    std::uniform_int_distribution<int> shapes(3, 7);
    const int n = shapes(rng);
    for (int i = 0; i < n; ++i) {
        const Rgb col = random_color(rng);
        const double cy = u(rng) * fh;
        const double cx = u(rng) * fw;
        const double ry = (0.08 + 0.3 * u(rng)) * fh;
        const double rx = (0.08 + 0.3 * u(rng)) * fw;
        switch (static_cast<int>(u(rng) * 3.0)) {
            case 0:
                paint(img, col, 1.0f, [&](double py, double px) {
                    const double a = (py - cy) / ry;
                    const double b = (px - cx) / rx;
                    return a * a + b * b <= 1.0;
                });
                break;
            case 1: {
                const double th = u(rng) * std::numbers::pi;
                const double ct = std::cos(th);
                const double st = std::sin(th);
                paint(img, col, 1.0f, [&](double py, double px) {
                    const double a = (px - cx) * ct + (py - cy) * st;
                    const double b = -(px - cx) * st + (py - cy) * ct;
                    return std::abs(a) <= rx && std::abs(b) <= ry * 0.5;
                });
                break;
            }
            default: {
                // thin line
                const double th = u(rng) * std::numbers::pi;
                const double ct = std::cos(th);
                const double st = std::sin(th);
                const double half = 1.5 + 2.5 * u(rng);
                paint(img, col, 1.0f, [&](double py, double px) {
                    const double d = -(px - cx) * st + (py - cy) * ct;
                    const double along = (px - cx) * ct + (py - cy) * st;
                    return std::abs(d) <= half && std::abs(along) <= rx * 1.5;
                });
                break;
            }
        }
    }
    for (float& v : img.data()) v = std::clamp(v, 0.0f, 1.0f);
    return img;
}

SyntheticSource::SyntheticSource(int count, int hr_size, std::uint64_t seed, std::vector<int> qps,
                                 ImageCodec* codec, int scale)
    : scale_(scale) {
    if (count < 1) throw UsageError("synthetic source needs at least one image");
    if (scale < 1 || hr_size < scale || hr_size % scale != 0) {
        throw UsageError("synthetic HR size " + std::to_string(hr_size) + " must be a positive multiple of the scale");
    }
    if (qps.empty()) throw UsageError("synthetic source needs at least one qp label");
    for (int qp : qps)
        if (!is_challenge_qp(qp)) throw UsageError("qp " + std::to_string(qp) + " is not a challenge qp");
    std::mt19937_64 rng(seed);
    for (int i = 0; i < count; ++i) {
        Item item;
        item.hr = synthetic_texture(hr_size, hr_size, rng);
        item.qp = qps[static_cast<std::size_t>(i) % qps.size()];
        DegradationSpec spec;
        spec.scale = scale;
        if (codec != nullptr) spec.qp = item.qp;
        item.lr = degrade(item.hr, spec, codec);
        items_.push_back(std::move(item));
    }
}

Batch SyntheticSource::next_batch(const BatchRequest& req, std::mt19937_64& rng) {
    if (req.scale != scale_) throw UsageError("batch scale does not match the synthetic source");
    std::vector<const Tensor*> hr;
    std::vector<const Tensor*> lr;
    std::vector<int> labels;
    for (const auto& it : items_) {
        if (!req.qps.empty() && std::find(req.qps.begin(), req.qps.end(), it.qp) == req.qps.end()) continue;
        hr.push_back(&it.hr);
        lr.push_back(&it.lr);
        labels.push_back(it.qp);
    }
    return sample_crops(hr, lr, labels, req, rng);
}

namespace {

// side x side crop at (y, x) under one of the eight square symmetries: bit 0 mirrors
// columns, bit 1 mirrors rows, bit 2 transposes.
Tensor square_crop(const Tensor& src, std::int64_t y, std::int64_t x, std::int64_t side, int d) {
    Tensor out({1, 3, side, side});
    for (std::int64_t c = 0; c < 3; ++c)
        for (std::int64_t r = 0; r < side; ++r)
            for (std::int64_t q = 0; q < side; ++q) {
                std::int64_t sr = (d & 4) ? q : r;
                std::int64_t sq = (d & 4) ? r : q;
                if (d & 1) sq = side - 1 - sq;
                if (d & 2) sr = side - 1 - sr;
                out.at(0, c, r, q) = src.at(0, c, y + sr, x + sq);
            }
    return out;
}

}  // namespace

Batch sample_crops(const std::vector<const Tensor*>& hr, const std::vector<const Tensor*>& lr,
                   const std::vector<int>& qps, const BatchRequest& req, std::mt19937_64& rng) {
    if (hr.empty()) throw DataError("no training pairs match the requested qp subset");
    if (req.batch < 1 || req.patch < req.scale || req.patch % req.scale != 0) {
        throw UsageError("invalid batch request (batch " + std::to_string(req.batch) + ", patch " +
                         std::to_string(req.patch) + ")");
    }
    const std::int64_t lp = req.patch / req.scale;
    std::vector<Tensor> hs;
    std::vector<Tensor> ls;
    Batch out;
    std::uniform_int_distribution<std::size_t> pick(0, hr.size() - 1);
    std::uniform_int_distribution<int> flips(0, 7);
    for (int b = 0; b < req.batch; ++b) {
        const std::size_t k = pick(rng);
        // LR rows whose full HR footprint exists.
        const std::int64_t lh = std::min(lr[k]->shape().h, hr[k]->shape().h / req.scale);
        const std::int64_t lw = std::min(lr[k]->shape().w, hr[k]->shape().w / req.scale);
        if (lh < lp || lw < lp) throw DataError("training pair " + std::to_string(k) + " is smaller than the patch size");
        std::uniform_int_distribution<std::int64_t> oy(0, lh - lp);
        std::uniform_int_distribution<std::int64_t> ox(0, lw - lp);
        const std::int64_t y = oy(rng);
        const std::int64_t x = ox(rng);
        const int d = req.augment ? flips(rng) : 0;
        ls.push_back(square_crop(*lr[k], y, x, lp, d));
        hs.push_back(square_crop(*hr[k], y * req.scale, x * req.scale, lp * req.scale, d));
        out.qps.push_back(qps[k]);
    }
    out.lr = stack_batch(ls);
    out.hr = stack_batch(hs);
    return out;
}

namespace {

json loss_to_json(const LossConfig& c) {
    return {{"l1", c.l1},   {"gradient_map", c.gradient_map}, {"fft_l1", c.fft_l1},
            {"mse", c.mse}, {"distill_mse", c.distill_mse},   {"aux_x2", c.aux_x2}};
}

LossConfig loss_from_json(const json& j) {
    LossConfig c = LossConfig::l1_only();
    c.l1 = j.value("l1", 0.0);
    c.gradient_map = j.value("gradient_map", 0.0);
    c.fft_l1 = j.value("fft_l1", 0.0);
    c.mse = j.value("mse", 0.0);
    c.distill_mse = j.value("distill_mse", 0.0);
    c.aux_x2 = j.value("aux_x2", 0.0);
    return c;
}

bool has_aux_head(const ModelSpec& spec) {
    return std::any_of(spec.layers.begin(), spec.layers.end(),
                       [](const Layer& l) { return std::holds_alternative<AuxHeadLayer>(l); });
}

}  // namespace

StagePlan plan_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        StagePlan plan;
        plan.seed = j.value("seed", std::uint64_t{0});
        plan.log_every = j.value("log_every", 10);
        for (const auto& s : j.at("stages")) {
            Stage st;
            st.name = s.value("name", std::string("stage") + std::to_string(plan.stages.size()));
            st.qps = s.value("qps", std::vector<int>{});
            st.patch = s.value("patch", 64);
            st.batch = s.value("batch", 8);
            st.iterations = s.value("iterations", 100);
            if (s.contains("loss")) st.loss = loss_from_json(s.at("loss"));
            if (s.contains("schedule")) {
                const auto& sc = s.at("schedule");
                st.schedule.kind = schedule_from_string(sc.value("kind", std::string("cosine")));
                st.schedule.lr_max = sc.value("lr_max", st.schedule.lr_max);
                st.schedule.lr_min = sc.value("lr_min", st.schedule.lr_min);
                st.schedule.warmup_fraction = sc.value("warmup_fraction", 0.0);
                st.schedule.milestones = sc.value("milestones", std::vector<std::int64_t>{});
            }
            st.strip_bias_before = s.value("strip_bias_before", false);
            st.augment = s.value("augment", false);
            st.fuse_before = s.value("fuse_before", false);
            if (s.contains("distill_teacher") && !s.at("distill_teacher").is_null()) {
                st.distill_teacher = s.at("distill_teacher").get<std::string>();
            }
            plan.stages.push_back(std::move(st));
        }
        return plan;
    } catch (const json::exception& e) {
        throw UsageError(std::string("malformed stage plan: ") + e.what());
    }
}

std::string plan_to_json(const StagePlan& plan) {
    json stages = json::array();
    for (const auto& st : plan.stages) {
        stages.push_back({{"name", st.name},
                          {"qps", st.qps},
                          {"patch", st.patch},
                          {"batch", st.batch},
                          {"iterations", st.iterations},
                          {"loss", loss_to_json(st.loss)},
                          {"schedule",
                           {{"kind", std::string(to_string(st.schedule.kind))},
                            {"lr_max", st.schedule.lr_max},
                            {"lr_min", st.schedule.lr_min},
                            {"warmup_fraction", st.schedule.warmup_fraction},
                            {"milestones", st.schedule.milestones}}},
                          {"strip_bias_before", st.strip_bias_before},
                          {"augment", st.augment},
                          {"fuse_before", st.fuse_before},
                          {"distill_teacher", st.distill_teacher ? json(*st.distill_teacher) : json(nullptr)}});
    }
    return json{{"seed", plan.seed}, {"log_every", plan.log_every}, {"stages", stages}}.dump(2);
}

std::string to_json_line(const LogRecord& r) {
    return json{{"stage", r.stage}, {"iter", r.iter}, {"loss", r.loss}, {"lr", r.lr}}.dump();
}

void validate_plan(const StagePlan& plan, const ModelSpec& spec) {
    if (plan.stages.empty()) throw UsageError("stage plan has no stages");
    if (plan.log_every < 1) throw UsageError("log_every must be at least 1");
    const int m = input_multiple(spec);
    for (std::size_t i = 0; i < plan.stages.size(); ++i) {
        const Stage& st = plan.stages[i];
        const std::string where = "stage " + std::to_string(i) + " (" + st.name + "): ";
        if (st.iterations < 1) throw UsageError(where + "iterations must be at least 1");
        if (st.batch < 1) throw UsageError(where + "batch must be at least 1");
        if (st.patch < spec.scale || st.patch % spec.scale != 0 || (st.patch / spec.scale) % m != 0) {
            throw UsageError(where + "patch " + std::to_string(st.patch) + " incompatible with scale " +
                             std::to_string(spec.scale) + " and input multiple " + std::to_string(m));
        }
        for (int qp : st.qps)
            if (!is_challenge_qp(qp)) throw UsageError(where + "qp " + std::to_string(qp) + " is not a challenge qp");
        st.loss.validate();
        if (st.loss.distill_mse > 0 && !st.distill_teacher) throw UsageError(where + "distill weight without a teacher");
        if (st.loss.aux_x2 > 0 && !has_aux_head(spec)) throw UsageError(where + "aux_x2 weight but the model has no aux head");
        if (st.schedule.lr_max < 0 || st.schedule.lr_min < 0) throw UsageError(where + "negative learning rate");
    }
}

double train_step(ModelGraph& model, Adam& adam, const Batch& batch, const LossConfig& cfg, double lr,
                  const ModelGraph* teacher) {
    Tape tape;
    const Var x = tape.leaf(batch.lr);
    std::optional<Var> aux;
    const Var out = forward_on_tape(tape, model, x, cfg.aux_x2 > 0 ? &aux : nullptr);

    std::optional<Tensor> teacher_sr;
    std::optional<Tensor> hr2;
    LossExtras extras;
    if (cfg.distill_mse > 0) {
        if (teacher == nullptr) throw UsageError("distillation requested without a teacher");
        teacher_sr = forward(*teacher, batch.lr);
        extras.teacher_sr = &*teacher_sr;
    }
    if (cfg.aux_x2 > 0) {
        if (!aux) throw UsageError("aux_x2 requested but the model produced no auxiliary output");
        hr2 = half_resolution(batch.hr);
        extras.aux_sr2 = &tape.value(*aux);
        extras.hr2 = &*hr2;
    }
    const LossResult loss = loss_eval(tape.value(out), batch.hr, cfg, extras);
    std::vector<std::pair<Var, Tensor>> seeds{{out, loss.grad_sr}};
    if (loss.grad_aux) seeds.emplace_back(*aux, *loss.grad_aux);
    tape.backward(seeds);

    adam.begin_step();
    for_each_parameter(model, [&](const std::string& name, std::span<float> values, const std::vector<std::int64_t>&) {
        adam.update(name, values, tape.param_grad(values.data()), lr);
    });
    return loss.total;
}

TrainResult run_stage_plan(ModelGraph model, const StagePlan& plan, DataSource& data, const TrainOptions& opts) {
    validate_plan(plan, model.spec);
    std::vector<std::optional<ModelGraph>> teachers;
    for (const auto& st : plan.stages) {
        if (!st.distill_teacher) {
            teachers.emplace_back();
            continue;
        }
        std::optional<ModelGraph> t = opts.teacher ? opts.teacher(*st.distill_teacher) : std::nullopt;
        if (!t) throw UsageError("unknown teacher '" + *st.distill_teacher + "'");
        teachers.push_back(std::move(t));
    }

    TrainResult result;
    std::mt19937_64 rng(plan.seed);
    for (std::size_t si = 0; si < plan.stages.size(); ++si) {
        const Stage& st = plan.stages[si];
        if (st.fuse_before && model.mode == Mode::train) model = fuse(model);
        if (st.strip_bias_before) strip_bias(model);
        Schedule sched = st.schedule;
        sched.total = st.iterations;
        Adam adam;
        const BatchRequest req{st.batch, st.patch, model.spec.scale, st.qps, st.augment};
        for (int it = 0; it < st.iterations; ++it) {
            const double lr = lr_at(sched, it);
            const Batch batch = data.next_batch(req, rng);
            const double loss = train_step(model, adam, batch, st.loss, lr, teachers[si] ? &*teachers[si] : nullptr);
            if (it % plan.log_every == 0 || it + 1 == st.iterations) {
                const LogRecord rec{static_cast<int>(si), it, loss, lr};
                result.log.push_back(rec);
                if (opts.on_log) opts.on_log(rec);
            }
        }
    }
    result.model = std::move(model);
    return result;
}

}  // namespace rtsr

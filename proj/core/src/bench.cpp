#include "rtsr/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "rtsr/dataset.hpp"
#include "rtsr/errors.hpp"
#include "rtsr/image_io.hpp"
#include "rtsr/parallel.hpp"
#include "rtsr/resample.hpp"
#include "rtsr/weights.hpp"

namespace rtsr {

namespace {

Tensor pad_edge_to(const Tensor& img, std::int64_t h, std::int64_t w) {
    const Shape& s = img.shape();
    if (s.h == h && s.w == w) return img;
    Tensor out({s.n, s.c, h, w});
    for (std::int64_t n = 0; n < s.n; ++n)
        for (std::int64_t c = 0; c < s.c; ++c)
            for (std::int64_t y = 0; y < h; ++y)
                for (std::int64_t x = 0; x < w; ++x)
                    out.at(n, c, y, x) = img.at(n, c, std::min(y, s.h - 1), std::min(x, s.w - 1));
    return out;
}

Tensor crop_to(const Tensor& img, std::int64_t h, std::int64_t w) {
    const Shape& s = img.shape();
    if (s.h == h && s.w == w) return img;
    Tensor out({s.n, s.c, h, w});
    for (std::int64_t n = 0; n < s.n; ++n)
        for (std::int64_t c = 0; c < s.c; ++c)
            for (std::int64_t y = 0; y < h; ++y) std::copy_n(img.plane(n, c) + y * s.w, w, out.plane(n, c) + y * w);
    return out;
}

struct QpAccum {
    ImageMetrics sum;
    int images = 0;
    std::vector<double> samples;
};

}  // namespace

void RunConfig::validate() const {
    if (warmup < 0) throw UsageError("warmup runs must be >= 0");
    if (runs < 1) throw UsageError("timed runs must be >= 1");
    if (threads < 1) throw UsageError("thread count must be >= 1");
    if (!(score_c > 0.0)) throw UsageError("score constant C must be positive");
}

Clock steady_clock_ms() {
    return [] {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now().time_since_epoch()).count();
    };
}

RuntimeStats summarize(const std::vector<double>& samples) {
    if (samples.empty()) throw UsageError("no runtime samples");
    RuntimeStats st;
    double sum = 0.0;
    for (double v : samples) sum += v;
    st.mean_ms = sum / static_cast<double>(samples.size());
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    auto rank = [&](double p) {
        const auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
        return sorted[std::clamp<std::size_t>(k, 1, sorted.size()) - 1];
    };
    st.p50_ms = rank(0.50);
    st.p95_ms = rank(0.95);
    return st;
}

Upscaler model_upscaler(const ModelGraph& g) {
    return {g.spec.name, parameter_count(g), input_multiple(g.spec), [g](const Tensor& lr) { return forward(g, lr); }};
}

Upscaler baseline_upscaler(int scale) {
    return {kBaselineModelName, 0, 1, [scale](const Tensor& lr) { return baseline_upsample(lr, scale); }};
}

ModelGraph resolve_model(const std::string& id) {
    if (std::filesystem::is_regular_file(id)) return load_weights(id);
    const auto names = zoo_names();
    if (std::find(names.begin(), names.end(), id) != names.end()) return build(zoo_spec(id), Mode::train);
    throw UsageError("'" + id + "' is neither a weight file nor a zoo model");
}

std::vector<ReportRow> benchmark_upscaler(const Upscaler& up, const RunConfig& cfg, const Clock& clock,
                                          std::vector<double>* samples) {
    cfg.validate();
    std::filesystem::path root;
    const Manifest m = load_manifest(cfg.manifest, &root);
    std::map<int, QpAccum> acc;
    for (const auto& p : m.pairs) {
        if (!cfg.qps.empty() && std::find(cfg.qps.begin(), cfg.qps.end(), p.qp) == cfg.qps.end()) continue;
        const auto hr_path = p.hr.is_absolute() ? p.hr : root / p.hr;
        const auto lr_path = p.lr.is_absolute() ? p.lr : root / p.lr;
        if (!std::filesystem::exists(hr_path)) throw DataError("missing HR file " + hr_path.string());
        if (!std::filesystem::exists(lr_path)) throw DataError("missing LR file " + lr_path.string());
        const Tensor hr = read_image(hr_path);
        const Tensor lr = read_image(lr_path);
        const Shape& hs = hr.shape();
        const Shape& ls = lr.shape();
        if (hs.h > ls.h * m.scale || hs.w > ls.w * m.scale || hs.h <= (ls.h - 1) * m.scale ||
            hs.w <= (ls.w - 1) * m.scale) {
            throw DataError("size mismatch for " + p.stem + " qp " + std::to_string(p.qp) + ": LR " + to_string(ls) +
                            " x" + std::to_string(m.scale) + " does not cover HR " + to_string(hs));
        }
        const std::int64_t mult = up.input_multiple;
        const Tensor input = pad_edge_to(lr, (ls.h + mult - 1) / mult * mult, (ls.w + mult - 1) / mult * mult);

        auto& a = acc[p.qp];
        for (int i = 0; i < cfg.warmup; ++i) up.run(input);
        Tensor sr;
        for (int i = 0; i < cfg.runs; ++i) {
            const double t0 = clock();
            sr = up.run(input);
            const double t1 = clock();
            a.samples.push_back(t1 - t0);
            if (samples != nullptr) samples->push_back(t1 - t0);
        }
        const ImageMetrics im = evaluate_pair(crop_to(sr, hs.h, hs.w), hr);
        a.sum.psnr_rgb += im.psnr_rgb;
        a.sum.psnr_y += im.psnr_y;
        a.sum.ssim_rgb += im.ssim_rgb;
        a.sum.ssim_y += im.ssim_y;
        ++a.images;
    }
    if (acc.empty()) throw DataError("no manifest pairs match the requested QPs");

    std::vector<ReportRow> rows;
    for (const auto& [qp, a] : acc) {
        ReportRow r;
        r.model = up.name;
        r.qp = qp;
        const double n = a.images;
        r.psnr_rgb = a.sum.psnr_rgb / n;
        r.psnr_y = a.sum.psnr_y / n;
        r.ssim_rgb = a.sum.ssim_rgb / n;
        r.ssim_y = a.sum.ssim_y / n;
        r.runtime = summarize(a.samples);
        r.params_m = static_cast<double>(up.params) / 1e6;
        rows.push_back(r);
    }
    return rows;
}

namespace {

std::optional<QpPair> psnr_y_pair(const std::vector<ReportRow>& rows) {
    std::optional<double> a;
    std::optional<double> b;
    for (const auto& r : rows) {
        if (r.qp == 31) a = r.psnr_y;
        if (r.qp == 63) b = r.psnr_y;
    }
    if (!a || !b) return std::nullopt;
    return QpPair{*a, *b};
}

}  // namespace

std::vector<ReportRow> run_benchmark(const RunConfig& cfg, const Clock& clock) {
    cfg.validate();
    const int saved_threads = thread_count();
    set_thread_count(cfg.threads);
    struct Restore {
        int n;
        ~Restore() { set_thread_count(n); }
    } restore{saved_threads};

    if (cfg.model == kBaselineModelName) {
        auto rows = benchmark_upscaler(baseline_upscaler(load_manifest(cfg.manifest).scale), cfg, clock);
        for (auto& r : rows) r.delta_db = 0.0;
        return rows;
    }
    ModelGraph g = resolve_model(cfg.model);
    if (g.mode == Mode::train) g = fuse(g);
    std::vector<double> samples;
    std::vector<ReportRow> rows = benchmark_upscaler(model_upscaler(g), cfg, clock, &samples);

    std::vector<ReportRow> base_rows;
    std::optional<QpPair> base = cfg.baseline_psnr_y;
    if (cfg.with_baseline) {
        base_rows = benchmark_upscaler(baseline_upscaler(g.spec.scale), cfg, clock);
        if (!base) base = psnr_y_pair(base_rows);
        for (auto& r : base_rows) r.delta_db = 0.0;
    }
    const auto mine = psnr_y_pair(rows);
    if (base && mine) {
        const double delta = delta_psnr(*mine, *base);
        const double t = summarize(samples).mean_ms;
        for (auto& r : rows) {
            r.delta_db = delta;
            if (t > 0.0) r.score = challenge_score({delta, t, cfg.score_c});
        }
    }
    rows.insert(rows.end(), base_rows.begin(), base_rows.end());
    return rows;
}

}  // namespace rtsr

// rtsr: dataset preparation, training, fusion, verification, evaluation and scoring.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "rtsr/bench.hpp"
#include "rtsr/codec.hpp"
#include "rtsr/dataset.hpp"
#include "rtsr/errors.hpp"
#include "rtsr/metrics.hpp"
#include "rtsr/parallel.hpp"
#include "rtsr/report.hpp"
#include "rtsr/trainer.hpp"
#include "rtsr/weights.hpp"

namespace {

using namespace rtsr;

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct PrepareArgs {
    std::string hr, out, codec_cmd, decode_cmd = kDefaultDecodeTemplate;
    std::vector<int> qps{31, 39, 47, 55, 63};
    bool no_codec = false;
    int preset = kDefaultPreset;
    int scale = 4;
};

int cmd_prepare(const PrepareArgs& a) {
    PrepareOptions opts;
    opts.qps = a.qps;
    opts.scale = a.scale;
    std::optional<SubprocessCodec> codec;
    if (!a.no_codec) {
        CodecCommands cmds;
        if (!a.codec_cmd.empty()) cmds.encode = a.codec_cmd;
        cmds.decode = a.decode_cmd;
        cmds.preset = a.preset;
        codec.emplace(cmds);
        opts.codec = &*codec;
    }
    const Manifest m = prepare_dataset(a.hr, a.out, opts);
    for (const auto& e : m.errors) std::cerr << "error: " << e << "\n";
    std::cout << "wrote " << m.pairs.size() << " pairs to " << a.out << "\n";
    return m.errors.empty() ? 0 : exit_code_for(ErrorKind::data);
}

struct TrainArgs {
    std::string spec, plan, data, out, init, log;
    int synthetic = 0;
    int threads = 1;
};

int cmd_train(const TrainArgs& a) {
    set_thread_count(a.threads);
    const StagePlan plan = plan_from_json(read_text(a.plan));
    ModelGraph model = a.init.empty() ? build(zoo_spec(a.spec), Mode::train, {plan.seed}) : load_weights(a.init);
    if (!a.init.empty() && model.spec.name != a.spec) {
        throw UsageError("initial weights hold '" + model.spec.name + "', not '" + a.spec + "'");
    }
    std::unique_ptr<DataSource> data;
    if (a.synthetic > 0) {
        data = std::make_unique<SyntheticSource>(a.synthetic, 64, plan.seed, std::vector<int>{31}, nullptr,
                                                 model.spec.scale);
    } else {
        if (a.data.empty()) throw UsageError("--data or --synthetic is required");
        data = std::make_unique<ManifestSource>(a.data);
    }
    std::ofstream log_file;
    if (!a.log.empty()) {
        log_file.open(a.log);
        if (!log_file) throw DataError("cannot write " + a.log);
    }
    std::ostream& log = a.log.empty() ? std::cout : log_file;
    TrainOptions opts;
    opts.teacher = [](const std::string& id) -> std::optional<ModelGraph> { return resolve_model(id); };
    opts.on_log = [&](const LogRecord& r) { log << to_json_line(r) << "\n" << std::flush; };
    const TrainResult res = run_stage_plan(std::move(model), plan, *data, opts);
    save_weights(res.model, a.out);
    std::cerr << "saved " << to_string(res.model.mode) << " weights to " << a.out << "\n";
    return 0;
}

int cmd_fuse(const std::string& in, const std::string& out) {
    const ModelGraph g = load_weights(in);
    const ModelGraph d = g.mode == Mode::train ? fuse(g) : g;
    save_weights(d, out);
    std::cout << g.spec.name << ": " << parameter_count(g) << " -> " << parameter_count(d) << " parameters, "
              << conv_layer_count(d) << " conv layers\n";
    return 0;
}

int cmd_verify(const std::string& in, double tol, int trials, int size) {
    const ModelGraph g = load_weights(in);
    if (g.mode == Mode::deploy) {
        const bool ok = is_deploy_form(g);
        std::cout << g.spec.name << ": deploy file, " << (ok ? "every block is a single conv" : "unfused blocks present")
                  << "\n";
        return ok ? 0 : exit_code_for(ErrorKind::data);
    }
    const float err = max_train_deploy_error(g, fuse(g), trials, size, 1);
    std::printf("%s: max |train - deploy| = %.3g over %d inputs (tol %.3g): %s\n", g.spec.name.c_str(), err, trials,
                tol, err <= tol ? "ok" : "FAIL");
    return err <= tol ? 0 : exit_code_for(ErrorKind::data);
}

struct EvalArgs {
    RunConfig cfg;
    std::string report, format = "table";
    bool no_baseline = false;
    std::vector<double> baseline_y;
};

int cmd_eval(EvalArgs a) {
    a.cfg.with_baseline = !a.no_baseline;
    if (!a.baseline_y.empty()) {
        if (a.baseline_y.size() != 2) throw UsageError("--baseline-y takes the QP31 and QP63 PSNR-Y values");
        a.cfg.baseline_psnr_y = QpPair{a.baseline_y[0], a.baseline_y[1]};
    }
    const ReportFormat fmt = report_format_from_string(a.format);
    const auto rows = run_benchmark(a.cfg);
    emit_report(rows, fmt, a.report, std::cout);
    return 0;
}

int cmd_score(double delta, double runtime, double c) {
    std::printf("%.4f\n", challenge_score({delta, runtime, c}));
    return 0;
}

int cmd_zoo() {
    std::printf("%-14s %10s %10s %6s %9s\n", "name", "train", "deploy", "convs", "mandatory");
    for (const auto& spec : zoo_catalog()) {
        const ModelGraph t = build(spec, Mode::train);
        const ModelGraph d = fuse(t);
        std::printf("%-14s %10lld %10lld %6d %9s\n", spec.name.c_str(), static_cast<long long>(parameter_count(t)),
                    static_cast<long long>(parameter_count(d)), conv_layer_count(d), spec.mandatory ? "yes" : "no");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Real-time x4 super-resolution toolkit"};
    app.require_subcommand(1);

    PrepareArgs prep;
    auto* p = app.add_subcommand("prepare", "Build LR/HR pairs from a directory of HR images");
    p->add_option("--hr", prep.hr, "HR image directory")->required();
    p->add_option("--out", prep.out, "Output directory")->required();
    p->add_option("--qp", prep.qps, "QP list")->delimiter(',');
    auto* codec_opt = p->add_option("--codec-cmd", prep.codec_cmd, "Encode command template");
    p->add_option("--decode-cmd", prep.decode_cmd, "Decode command template");
    p->add_flag("--no-codec", prep.no_codec, "Internal Lanczos downscale without compression")->excludes(codec_opt);
    p->add_option("--preset", prep.preset, "Encoder preset");
    p->add_option("--scale", prep.scale, "Downscale factor");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Run a staged training plan");
    t->add_option("--spec", tr.spec, "Zoo model name")->required();
    t->add_option("--plan", tr.plan, "Stage plan JSON")->required();
    t->add_option("--data", tr.data, "Prepared dataset directory or manifest");
    t->add_option("--synthetic", tr.synthetic, "Train on N synthetic 64x64 pairs instead");
    t->add_option("--out", tr.out, "Output weight file")->required();
    t->add_option("--init", tr.init, "Start from these weights");
    t->add_option("--log", tr.log, "JSON-lines log file (default stdout)");
    t->add_option("--threads", tr.threads, "Worker threads");

    std::string fuse_in, fuse_out;
    auto* f = app.add_subcommand("fuse", "Lower a train-mode weight file to deploy form");
    f->add_option("--in", fuse_in)->required();
    f->add_option("--out", fuse_out)->required();

    std::string verify_in;
    double tol = 1e-4;
    int trials = 100;
    int size = 24;
    auto* v = app.add_subcommand("verify", "Check train/deploy equivalence of a weight file");
    v->add_option("--in", verify_in)->required();
    v->add_option("--tol", tol, "Max abs error");
    v->add_option("--trials", trials, "Random inputs");
    v->add_option("--size", size, "Input side");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Time a model and measure quality on a manifest");
    e->add_option("--weights", ev.cfg.model, "Weight file, zoo name or lanczos_baseline")->required();
    e->add_option("--manifest", ev.cfg.manifest, "Manifest file or dataset directory")->required();
    e->add_option("--runs", ev.cfg.runs, "Timed runs per image");
    e->add_option("--warmup", ev.cfg.warmup, "Untimed warmup runs per image");
    e->add_option("--threads", ev.cfg.threads, "Worker threads");
    e->add_option("--qp", ev.cfg.qps, "Restrict to these QPs")->delimiter(',');
    e->add_option("--report", ev.report, "Report path (default stdout)");
    e->add_option("--format", ev.format, "csv, json or table");
    e->add_flag("--no-baseline", ev.no_baseline, "Skip the Lanczos baseline rows");
    e->add_option("--baseline-y", ev.baseline_y, "Baseline PSNR-Y at QP31,QP63")->delimiter(',');
    e->add_option("--c", ev.cfg.score_c, "Score scaling constant");

    double delta = 0.0, runtime = 0.0, c = 0.1;
    auto* s = app.add_subcommand("score", "Challenge score from delta PSNR and runtime");
    s->add_option("--delta", delta, "Delta PSNR-Y in dB")->required();
    s->add_option("--runtime-ms", runtime, "Runtime in ms")->required();
    s->add_option("--c", c, "Scaling constant");

    auto* z = app.add_subcommand("zoo", "List the model catalog");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int rc = app.exit(err);
        return rc == 0 ? 0 : exit_code_for(ErrorKind::usage);
    }

    try {
        if (p->parsed()) return cmd_prepare(prep);
        if (t->parsed()) return cmd_train(tr);
        if (f->parsed()) return cmd_fuse(fuse_in, fuse_out);
        if (v->parsed()) return cmd_verify(verify_in, tol, trials, size);
        if (e->parsed()) return cmd_eval(ev);
        if (s->parsed()) return cmd_score(delta, runtime, c);
        if (z->parsed()) return cmd_zoo();
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return exit_code_for(err.kind());
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return exit_code_for(ErrorKind::data);
    }
    return exit_code_for(ErrorKind::usage);
}

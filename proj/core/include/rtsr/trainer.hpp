#pragma once

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rtsr/loss.hpp"
#include "rtsr/model.hpp"
#include "rtsr/optim.hpp"
#include "rtsr/resample.hpp"

namespace rtsr {

struct BatchRequest {
    int batch = 8;
    int patch = 64;         // HR patch side
    int scale = 4;
    std::vector<int> qps;   // empty: any
    bool augment = false;   // random flips and transposes
};

struct Batch {
    Tensor lr;
    Tensor hr;
    std::vector<int> qps;
};

class DataSource {
public:
    virtual ~DataSource() = default;
    virtual Batch next_batch(const BatchRequest& req, std::mt19937_64& rng) = 0;
};

/// Procedural test card: gradient background, anti-aliased shapes and lines, in [0, 1].
Tensor synthetic_texture(std::int64_t h, std::int64_t w, std::mt19937_64& rng);

/// A fixed pool of synthetic HR images with their degraded LR counterparts. Items
/// are labelled round-robin with `qps`; without a codec the label does not change
/// the LR pixels.
class SyntheticSource : public DataSource {
public:
    struct Item {
        Tensor hr;
        Tensor lr;
        int qp = 0;
    };

    SyntheticSource(int count, int hr_size, std::uint64_t seed, std::vector<int> qps = {31},
                    ImageCodec* codec = nullptr, int scale = 4);

    Batch next_batch(const BatchRequest& req, std::mt19937_64& rng) override;
    const std::vector<Item>& items() const { return items_; }

private:
    std::vector<Item> items_;
    int scale_;
};

/// Random aligned crops from a pool of (HR, LR) pairs.
Batch sample_crops(const std::vector<const Tensor*>& hr, const std::vector<const Tensor*>& lr,
                   const std::vector<int>& qps, const BatchRequest& req, std::mt19937_64& rng);

struct Stage {
    std::string name;
    std::vector<int> qps;
    int patch = 64;
    int batch = 8;
    int iterations = 100;
    LossConfig loss = LossConfig::l1_only();
    Schedule schedule;
    bool strip_bias_before = false;
    bool fuse_before = false;
    bool augment = false;
    std::optional<std::string> distill_teacher;
};

struct StagePlan {
    std::vector<Stage> stages;
    std::uint64_t seed = 0;
    int log_every = 10;
};

StagePlan plan_from_json(const std::string& text);
std::string plan_to_json(const StagePlan& plan);

struct LogRecord {
    int stage = 0;
    std::int64_t iter = 0;
    double loss = 0.0;
    double lr = 0.0;
};

std::string to_json_line(const LogRecord& r);

using TeacherResolver = std::function<std::optional<ModelGraph>(const std::string& id)>;

struct TrainOptions {
    TeacherResolver teacher;
    std::function<void(const LogRecord&)> on_log;
};

struct TrainResult {
    ModelGraph model;
    std::vector<LogRecord> log;
};

/// Throws UsageError describing the first invalid stage.
void validate_plan(const StagePlan& plan, const ModelSpec& spec);

TrainResult run_stage_plan(ModelGraph model, const StagePlan& plan, DataSource& data, const TrainOptions& opts = {});

/// One optimisation step on a batch; returns the total loss before the update.
double train_step(ModelGraph& model, Adam& adam, const Batch& batch, const LossConfig& cfg, double lr,
                  const ModelGraph* teacher = nullptr);

}  // namespace rtsr

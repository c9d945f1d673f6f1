#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rtsr/codec.hpp"
#include "rtsr/trainer.hpp"

namespace rtsr {

struct ManifestPair {
    std::string stem;
    int qp = 0;
    std::filesystem::path hr;  // as found in the HR directory
    std::filesystem::path lr;  // relative to the manifest directory
};

struct Manifest {
    int scale = 4;
    bool external_codec = false;
    std::vector<ManifestPair> pairs;
    std::vector<std::string> errors;  // per-file failures, the run continues past them
};

struct PrepareOptions {
    std::vector<int> qps{31, 39, 47, 55, 63};
    int scale = 4;
    /// Null: internal Lanczos downscale without compression.
    const SubprocessCodec* codec = nullptr;
};

/// "{stem}_4x_qp{qp}.png" for scale 4.
std::string lr_file_name(const std::string& stem, int scale, int qp);

/// Writes one LR file per HR image and QP plus manifest.json into out_dir. Internal
/// mode output is deterministic, so reruns rewrite byte-identical files.
Manifest prepare_dataset(const std::filesystem::path& hr_dir, const std::filesystem::path& out_dir,
                         const PrepareOptions& opts);

std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text);
/// Reads `path` (a manifest file or a directory holding manifest.json).
Manifest load_manifest(const std::filesystem::path& path, std::filesystem::path* root = nullptr);

/// Training pairs loaded from a prepared manifest.
class ManifestSource : public DataSource {
public:
    explicit ManifestSource(const std::filesystem::path& manifest);

    Batch next_batch(const BatchRequest& req, std::mt19937_64& rng) override;
    std::size_t size() const { return hr_.size(); }

private:
    std::vector<Tensor> hr_;
    std::vector<Tensor> lr_;
    std::vector<int> qps_;
    int scale_ = 4;
};

}  // namespace rtsr

#include "rtsr/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rtsr/errors.hpp"
#include "rtsr/image_io.hpp"
#include "rtsr/parallel.hpp"

namespace rtsr {

using json = nlohmann::json;

namespace {

bool is_image_file(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".ppm";
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw DataError("HR directory " + dir.string() + " does not exist");
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("cannot write " + path.string());
}

struct FileResult {
    std::vector<ManifestPair> pairs;
    std::string error;
};

}  // namespace

std::string lr_file_name(const std::string& stem, int scale, int qp) {
    return stem + "_" + std::to_string(scale) + "x_qp" + std::to_string(qp) + ".png";
}

Manifest prepare_dataset(const std::filesystem::path& hr_dir, const std::filesystem::path& out_dir,
                         const PrepareOptions& opts) {
    if (opts.qps.empty()) throw UsageError("at least one QP is required");
    for (int qp : opts.qps)
        if (qp < 0 || qp > 63) throw UsageError("QP " + std::to_string(qp) + " outside [0, 63]");
    if (opts.scale < 1) throw UsageError("scale must be positive");
    const auto files = list_images(hr_dir);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (!std::filesystem::is_directory(out_dir)) throw DataError("cannot create output directory " + out_dir.string());

    std::vector<FileResult> results(files.size());
    parallel_for(static_cast<std::int64_t>(files.size()), [&](std::int64_t i) {
        const auto& file = files[static_cast<std::size_t>(i)];
        auto& res = results[static_cast<std::size_t>(i)];
        const std::string stem = file.stem().string();
        try {
            const Tensor hr = read_image(file);
            const Shape& s = hr.shape();
            if (s.h < opts.scale || s.w < opts.scale) {
                throw DataError("image is " + std::to_string(s.w) + "x" + std::to_string(s.h) + ", needs at least " +
                                std::to_string(opts.scale) + " pixels per side");
            }
            std::optional<Tensor> internal;
            if (opts.codec == nullptr) {
                DegradationSpec spec;
                spec.scale = opts.scale;
                internal = degrade(hr, spec);
            }
            for (int qp : opts.qps) {
                const std::string name = lr_file_name(stem, opts.scale, qp);
                if (opts.codec != nullptr) {
                    opts.codec->encode_file(file, opts.scale, qp, out_dir / name);
                } else {
                    write_png(out_dir / name, *internal);
                }
                res.pairs.push_back({stem, qp, std::filesystem::absolute(file).lexically_normal(), name});
            }
        } catch (const Error& e) {
            res.pairs.clear();
            res.error = file.filename().string() + ": " + e.what();
        }
    });

    Manifest m;
    m.scale = opts.scale;
    m.external_codec = opts.codec != nullptr;
    for (auto& r : results) {
        m.pairs.insert(m.pairs.end(), r.pairs.begin(), r.pairs.end());
        if (!r.error.empty()) m.errors.push_back(r.error);
    }
    write_text(out_dir / "manifest.json", manifest_to_json(m));
    return m;
}

std::string manifest_to_json(const Manifest& m) {
    json pairs = json::array();
    for (const auto& p : m.pairs) {
        pairs.push_back({{"stem", p.stem}, {"qp", p.qp}, {"hr", p.hr.generic_string()}, {"lr", p.lr.generic_string()}});
    }
    const json j = {{"scale", m.scale}, {"external_codec", m.external_codec}, {"pairs", pairs}, {"errors", m.errors}};
    return j.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        Manifest m;
        m.scale = j.at("scale").get<int>();
        m.external_codec = j.value("external_codec", false);
        for (const auto& p : j.at("pairs")) {
            m.pairs.push_back({p.at("stem").get<std::string>(), p.at("qp").get<int>(), p.at("hr").get<std::string>(),
                               p.at("lr").get<std::string>()});
        }
        if (j.contains("errors")) m.errors = j.at("errors").get<std::vector<std::string>>();
        return m;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
}

Manifest load_manifest(const std::filesystem::path& path, std::filesystem::path* root) {
    const auto file = std::filesystem::is_directory(path) ? path / "manifest.json" : path;
    std::ifstream in(file);
    if (!in) throw DataError("cannot open manifest " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    if (root != nullptr) *root = file.parent_path();
    return manifest_from_json(ss.str());
}

ManifestSource::ManifestSource(const std::filesystem::path& manifest) {
    std::filesystem::path root;
    const Manifest m = load_manifest(manifest, &root);
    if (m.pairs.empty()) throw DataError("manifest " + manifest.string() + " lists no pairs");
    scale_ = m.scale;
    for (const auto& p : m.pairs) {
        Tensor hr = read_image(p.hr.is_absolute() ? p.hr : root / p.hr);
        Tensor lr = read_image(p.lr.is_absolute() ? p.lr : root / p.lr);
        // Ceil downscaling can leave the HR a few pixels short of lr * scale.
        if (hr.shape().h > lr.shape().h * scale_ || hr.shape().w > lr.shape().w * scale_ ||
            hr.shape().h <= (lr.shape().h - 1) * scale_ || hr.shape().w <= (lr.shape().w - 1) * scale_) {
            throw DataError("pair " + p.stem + " qp " + std::to_string(p.qp) + ": LR " + to_string(lr.shape()) +
                            " does not match HR " + to_string(hr.shape()) + " at x" + std::to_string(scale_));
        }
        hr_.push_back(std::move(hr));
        lr_.push_back(std::move(lr));
        qps_.push_back(p.qp);
    }
}

Batch ManifestSource::next_batch(const BatchRequest& req, std::mt19937_64& rng) {
    if (req.scale != scale_) throw UsageError("batch scale does not match the manifest scale");
    std::vector<const Tensor*> hr;
    std::vector<const Tensor*> lr;
    std::vector<int> labels;
    for (std::size_t i = 0; i < hr_.size(); ++i) {
        if (!req.qps.empty() && std::find(req.qps.begin(), req.qps.end(), qps_[i]) == req.qps.end()) continue;
        hr.push_back(&hr_[i]);
        lr.push_back(&lr_[i]);
        labels.push_back(qps_[i]);
    }
    return sample_crops(hr, lr, labels, req, rng);
}

}  // namespace rtsr

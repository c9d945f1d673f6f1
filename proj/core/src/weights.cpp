#include "rtsr/weights.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

namespace rtsr {

using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'R', 'T', 'S', 'R'};
constexpr std::size_t kPrefix = 4 + 4 + 8;
constexpr std::size_t kAlign = 16;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
T get_le(const std::uint8_t* p) {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(p[i]) << (8 * i);
    return v;
}

std::size_t align_up(std::size_t v) { return (v + kAlign - 1) / kAlign * kAlign; }

std::uint64_t numel(const std::vector<std::int64_t>& shape) {
    std::uint64_t n = 1;
    for (auto d : shape) n *= static_cast<std::uint64_t>(d);
    return n;
}

struct ParamView {
    std::string name;
    std::span<float> values;
    std::vector<std::int64_t> shape;
};

std::vector<ParamView> params_of(ModelGraph& g) {
    std::vector<ParamView> out;
    for_each_parameter(g, [&](const std::string& name, std::span<float> v, const std::vector<std::int64_t>& shape) {
        out.push_back({name, v, shape});
    });
    return out;
}

std::vector<TensorEntry> parse_manifest(const json& tensors) {
    std::vector<TensorEntry> out;
    for (const auto& t : tensors) {
        TensorEntry e;
        e.name = t.at("name").get<std::string>();
        e.shape = t.at("shape").get<std::vector<std::int64_t>>();
        e.offset = t.at("offset").get<std::uint64_t>();
        for (auto d : e.shape)
            if (d < 1) throw WeightFileError(WeightFault::bad_manifest, "tensor '" + e.name + "' has a non-positive dimension");
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace

std::string_view to_string(WeightFault f) {
    switch (f) {
        case WeightFault::bad_magic: return "bad magic";
        case WeightFault::unsupported_version: return "unsupported version";
        case WeightFault::truncated: return "truncated file";
        case WeightFault::bad_header: return "malformed header";
        case WeightFault::bad_manifest: return "invalid tensor manifest";
        case WeightFault::spec_mismatch: return "manifest does not match model";
    }
    return "weight file error";
}

std::vector<std::uint8_t> encode_weights(const ModelGraph& graph) {
    ModelGraph g = graph;
    const auto params = params_of(g);
    json tensors = json::array();
    std::uint64_t offset = 0;
    for (const auto& p : params) {
        tensors.push_back({{"name", p.name}, {"shape", p.shape}, {"offset", offset}});
        offset += p.values.size() * sizeof(float);
    }
    const json header = {{"model", g.spec.name}, {"spec", json::parse(spec_to_json(g))}, {"tensors", tensors}};
    const std::string text = header.dump();

    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    put_le<std::uint32_t>(out, kWeightVersion);
    put_le<std::uint64_t>(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    out.resize(align_up(out.size()), 0);
    out.reserve(out.size() + offset);
    for (const auto& p : params)
        for (float v : p.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

ModelGraph decode_weights(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw WeightFileError(WeightFault::bad_magic, "file does not start with \"RTSR\"");
    }
    if (bytes.size() < kPrefix) throw WeightFileError(WeightFault::truncated, "file ends inside the fixed prefix");
    const auto version = get_le<std::uint32_t>(bytes.data() + 4);
    const std::uint32_t major = version >> 16;
    const std::uint32_t minor = version & 0xffffu;
    if (major != kWeightMajor || minor > kWeightMinor) {
        throw WeightFileError(WeightFault::unsupported_version,
                              "file version " + std::to_string(major) + "." + std::to_string(minor) +
                                  ", reader supports " + std::to_string(kWeightMajor) + ".0 to " +
                                  std::to_string(kWeightMajor) + "." + std::to_string(kWeightMinor));
    }
    const auto header_len = get_le<std::uint64_t>(bytes.data() + 8);
    if (header_len > bytes.size() - kPrefix) throw WeightFileError(WeightFault::truncated, "file ends inside the header");
    const std::string text(bytes.begin() + kPrefix, bytes.begin() + static_cast<std::ptrdiff_t>(kPrefix + header_len));
    const std::size_t payload = align_up(kPrefix + header_len);

    json header;
    std::vector<TensorEntry> manifest;
    ModelGraph g;
    try {
        header = json::parse(text);
        manifest = parse_manifest(header.at("tensors"));
        g = graph_from_json(header.at("spec").dump());
        if (header.at("model").get<std::string>() != g.spec.name) {
            throw WeightFileError(WeightFault::spec_mismatch, "header names model '" + header.at("model").get<std::string>() +
                                                                  "' but the spec describes '" + g.spec.name + "'");
        }
    } catch (const json::exception& e) {
        throw WeightFileError(WeightFault::bad_header, e.what());
    } catch (const WeightFileError&) {
        throw;
    } catch (const DataError& e) {
        throw WeightFileError(WeightFault::bad_header, e.what());
    }

    std::uint64_t expected = 0;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const auto& e = manifest[i];
        if (e.offset % sizeof(float) != 0) {
            throw WeightFileError(WeightFault::bad_manifest, "tensor '" + e.name + "' is not float aligned");
        }
        if (e.offset < expected) {
            throw WeightFileError(WeightFault::bad_manifest, "tensor '" + e.name + "' at offset " + std::to_string(e.offset) +
                                                                 " overlaps the previous tensor (ends at " +
                                                                 std::to_string(expected) + ")");
        }
        if (e.offset != expected) {
            throw WeightFileError(WeightFault::bad_manifest, "gap before tensor '" + e.name + "' at offset " +
                                                                 std::to_string(e.offset));
        }
        expected = e.offset + numel(e.shape) * sizeof(float);
    }
    if (bytes.size() < payload || bytes.size() - payload < expected) {
        throw WeightFileError(WeightFault::truncated, "payload holds " +
                                                          std::to_string(bytes.size() > payload ? bytes.size() - payload : 0) +
                                                          " bytes, manifest needs " + std::to_string(expected));
    }
    if (bytes.size() - payload > expected) {
        throw WeightFileError(WeightFault::bad_manifest, "payload has " + std::to_string(bytes.size() - payload - expected) +
                                                             " bytes not covered by the manifest");
    }

    auto params = params_of(g);
    if (params.size() != manifest.size()) {
        throw WeightFileError(WeightFault::spec_mismatch, "model has " + std::to_string(params.size()) +
                                                              " tensors, manifest lists " + std::to_string(manifest.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& e = manifest[i];
        if (e.name != params[i].name || e.shape != params[i].shape) {
            throw WeightFileError(WeightFault::spec_mismatch,
                                  "manifest entry " + std::to_string(i) + " ('" + e.name + "') does not match model tensor '" +
                                      params[i].name + "'");
        }
        const std::uint8_t* src = bytes.data() + payload + e.offset;
        for (std::size_t k = 0; k < params[i].values.size(); ++k)
            params[i].values[k] = std::bit_cast<float>(get_le<std::uint32_t>(src + k * sizeof(float)));
    }
    return g;
}

void save_weights(const ModelGraph& g, const std::filesystem::path& path) {
    const auto bytes = encode_weights(g);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("cannot write " + path.string());
}

ModelGraph load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open weight file " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_weights(bytes);
}

}  // namespace rtsr

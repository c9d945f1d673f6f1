#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rtsr/errors.hpp"
#include "rtsr/model.hpp"

namespace rtsr {

// Layout: "RTSR" | u32 LE version | u64 LE header length | JSON header | zero padding to a
// 16-byte boundary | payload of little-endian float32 tensors in manifest order.
inline constexpr std::uint32_t kWeightMajor = 1;
inline constexpr std::uint32_t kWeightMinor = 1;
inline constexpr std::uint32_t weight_version(std::uint32_t major, std::uint32_t minor) { return major << 16 | minor; }
inline constexpr std::uint32_t kWeightVersion = weight_version(kWeightMajor, kWeightMinor);

enum class WeightFault { bad_magic, unsupported_version, truncated, bad_header, bad_manifest, spec_mismatch };

std::string_view to_string(WeightFault f);

class WeightFileError : public DataError {
public:
    WeightFileError(WeightFault fault, const std::string& detail)
        : DataError(std::string(to_string(fault)) + ": " + detail), fault_(fault) {}
    WeightFault fault() const noexcept { return fault_; }

private:
    WeightFault fault_;
};

struct TensorEntry {
    std::string name;
    std::vector<std::int64_t> shape;
    std::uint64_t offset = 0;  // bytes from the start of the payload
};

std::vector<std::uint8_t> encode_weights(const ModelGraph& g);
/// Throws WeightFileError naming the first fault found.
ModelGraph decode_weights(const std::vector<std::uint8_t>& bytes);

void save_weights(const ModelGraph& g, const std::filesystem::path& path);
ModelGraph load_weights(const std::filesystem::path& path);

}  // namespace rtsr

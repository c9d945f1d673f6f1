#pragma once

#include <filesystem>

#include "rtsr/tensor.hpp"

namespace rtsr {

/// Reads an 8-bit PNG (any colour type, converted to RGB) or a binary PPM (P6) into
/// a {1, 3, h, w} tensor with values v / 255. Throws DataError on unreadable files.
Tensor read_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG; each value becomes round(clamp(v, 0, 1) * 255).
void write_png(const std::filesystem::path& path, const Tensor& img);
void write_ppm(const std::filesystem::path& path, const Tensor& img);

/// Rounds every value to the nearest multiple of 1/255 after clamping.
Tensor quantize_8bit(const Tensor& img);

}  // namespace rtsr

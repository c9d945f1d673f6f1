#include "rtsr/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <vector>

#include "rtsr/errors.hpp"

namespace rtsr {

namespace {

std::uint8_t to_byte(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

std::vector<std::uint8_t> interleave(const Tensor& img) {
    const Shape& s = img.shape();
    if (s.n != 1 || s.c != 3) throw ShapeError("image writers need a {1, 3, h, w} tensor, got " + to_string(s));
    std::vector<std::uint8_t> px(static_cast<std::size_t>(s.plane() * 3));
    for (std::int64_t c = 0; c < 3; ++c) {
        const float* src = img.plane(0, c);
        for (std::int64_t i = 0; i < s.plane(); ++i) px[static_cast<std::size_t>(i * 3 + c)] = to_byte(src[i]);
    }
    return px;
}

Tensor planar(const std::uint8_t* px, std::int64_t h, std::int64_t w) {
    Tensor out({1, 3, h, w});
    for (std::int64_t c = 0; c < 3; ++c) {
        float* dst = out.plane(0, c);
        for (std::int64_t i = 0; i < h * w; ++i) dst[i] = static_cast<float>(px[i * 3 + c]) / 255.0f;
    }
    return out;
}

Tensor read_png(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw DataError("cannot read PNG " + path.string() + ": " + msg);
    }
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw DataError("cannot decode PNG " + path.string() + ": " + msg);
    }
    return planar(px.data(), image.height, image.width);
}

// Skips whitespace and '#' comments between PPM header fields.
void skip_gap(const std::vector<std::uint8_t>& buf, std::size_t& pos) {
    while (pos < buf.size()) {
        if (buf[pos] == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
        } else if (std::isspace(buf[pos])) {
            ++pos;
        } else {
            break;
        }
    }
}

long header_number(const std::vector<std::uint8_t>& buf, std::size_t& pos, const std::filesystem::path& path) {
    skip_gap(buf, pos);
    long v = 0;
    std::size_t digits = 0;
    while (pos < buf.size() && std::isdigit(buf[pos]) && digits < 9) {
        v = v * 10 + (buf[pos] - '0');
        ++pos;
        ++digits;
    }
    if (digits == 0) throw DataError("malformed PPM header in " + path.string());
    return v;
}

Tensor read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    const std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '6') throw DataError(path.string() + " is not a binary PPM");
    std::size_t pos = 2;
    const long w = header_number(buf, pos, path);
    const long h = header_number(buf, pos, path);
    const long maxval = header_number(buf, pos, path);
    if (w < 1 || h < 1 || maxval != 255) {
        throw DataError(path.string() + ": only 8-bit PPM with maxval 255 is supported");
    }
    if (pos >= buf.size() || !std::isspace(buf[pos])) throw DataError("malformed PPM header in " + path.string());
    ++pos;
    const auto need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
    if (buf.size() - pos < need) throw DataError("truncated PPM pixel data in " + path.string());
    return planar(buf.data() + pos, h, w);
}

std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

}  // namespace

Tensor read_image(const std::filesystem::path& path) {
    const std::string ext = lower_extension(path);
    if (ext == ".ppm") return read_ppm(path);
    return read_png(path);
}

void write_png(const std::filesystem::path& path, const Tensor& img) {
    const auto px = interleave(img);
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.shape().w);
    image.height = static_cast<png_uint_32>(img.shape().h);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, px.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw DataError("cannot write PNG " + path.string() + ": " + msg);
    }
}

void write_ppm(const std::filesystem::path& path, const Tensor& img) {
    const auto px = interleave(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "P6\n" << img.shape().w << ' ' << img.shape().h << "\n255\n";
    out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (!out) throw DataError("cannot write " + path.string());
}

Tensor quantize_8bit(const Tensor& img) {
    Tensor out(img.shape());
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] = static_cast<float>(to_byte(img.data()[i])) / 255.0f;
    return out;
}

}  // namespace rtsr

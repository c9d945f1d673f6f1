#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "rtsr/ops.hpp"
#include "rtsr/tensor.hpp"

namespace rtsr::testing {

inline Tensor random_tensor(Shape s, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(lo, hi);
    Tensor t(s);
    for (float& v : t.data()) v = u(rng);
    return t;
}

inline ConvParams random_conv(std::int64_t in, std::int64_t out, int k, bool bias, std::uint64_t seed, int stride = 1,
                              int groups = 1) {
    ConvParams p = ConvParams::make(in, out, k, bias, stride, groups);
    p.weight = random_tensor(p.weight.shape(), seed);
    if (p.bias) {
        std::mt19937_64 rng(seed + 1);
        std::uniform_real_distribution<float> u(-0.5f, 0.5f);
        for (float& b : *p.bias) b = u(rng);
    }
    return p;
}

// Direct nested-loop cross-correlation, accumulated in double.
inline Tensor conv_oracle(const Tensor& x, const ConvParams& p) {
    const Shape& s = x.shape();
    const auto oc = p.out_channels();
    const auto kh = p.kernel_h();
    const auto kw = p.kernel_w();
    const auto icg = p.weight.shape().c;
    const auto ocg = oc / p.groups;
    const auto oh = (s.h + 2 * p.padding - kh) / p.stride + 1;
    const auto ow = (s.w + 2 * p.padding - kw) / p.stride + 1;
    Tensor out({s.n, oc, oh, ow});
    for (std::int64_t n = 0; n < s.n; ++n)
        for (std::int64_t o = 0; o < oc; ++o) {
            const auto g = o / ocg;
            for (std::int64_t y = 0; y < oh; ++y)
                for (std::int64_t xx = 0; xx < ow; ++xx) {
                    double acc = p.bias ? (*p.bias)[static_cast<std::size_t>(o)] : 0.0;
                    for (std::int64_t ci = 0; ci < icg; ++ci)
                        for (std::int64_t dy = 0; dy < kh; ++dy)
                            for (std::int64_t dx = 0; dx < kw; ++dx) {
                                const auto iy = y * p.stride + dy - p.padding;
                                const auto ix = xx * p.stride + dx - p.padding;
                                if (iy < 0 || ix < 0 || iy >= s.h || ix >= s.w) continue;
                                acc += static_cast<double>(p.weight.at(o, ci, dy, dx)) * x.at(n, g * icg + ci, iy, ix);
                            }
                    out.at(n, o, y, xx) = static_cast<float>(acc);
                }
        }
    return out;
}

inline double max_rel_error(double a, double b, double floor = 1e-6) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Fresh empty directory under the system temp dir, removed by the destructor.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("rtsr-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace rtsr::testing

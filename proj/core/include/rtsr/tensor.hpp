#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rtsr {

/// Dense NCHW extent. Either every component is positive or all are zero.
struct Shape {
    std::int64_t n = 0;
    std::int64_t c = 0;
    std::int64_t h = 0;
    std::int64_t w = 0;

    std::int64_t numel() const { return n * c * h * w; }
    std::int64_t plane() const { return h * w; }
    bool empty() const { return numel() == 0; }

    friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Row-major (n, c, h, w) float32 tensor with value semantics.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> data);

    static Tensor zeros(Shape shape) { return Tensor(shape, 0.0f); }
    static Tensor full(Shape shape, float v) { return Tensor(shape, v); }

    const Shape& shape() const { return shape_; }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }
    const std::vector<float>& storage() const { return data_; }

    std::int64_t index(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) const {
        return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
    }
    float& at(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) {
        return data_[static_cast<std::size_t>(index(n, c, y, x))];
    }
    float at(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) const {
        return data_[static_cast<std::size_t>(index(n, c, y, x))];
    }

    /// Pointer to the (n, c) plane.
    float* plane(std::int64_t n, std::int64_t c) { return data_.data() + index(n, c, 0, 0); }
    const float* plane(std::int64_t n, std::int64_t c) const { return data_.data() + index(n, c, 0, 0); }

    /// Items [begin, end) along the batch axis.
    Tensor batch_slice(std::int64_t begin, std::int64_t end) const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_{};
    std::vector<float> data_;
};

/// Stacks tensors of identical (c, h, w) along the batch axis.
Tensor stack_batch(std::span<const Tensor> items);

float max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace rtsr

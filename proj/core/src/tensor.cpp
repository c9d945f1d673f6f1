#include "rtsr/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "rtsr/errors.hpp"

namespace rtsr {

std::string to_string(const Shape& s) {
    return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
           std::to_string(s.w) + ")";
}

namespace {

void check_shape(const Shape& s) {
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
        throw ShapeError("negative tensor extent " + to_string(s));
    }
    const bool any_zero = s.n == 0 || s.c == 0 || s.h == 0 || s.w == 0;
    const bool all_zero = s.n == 0 && s.c == 0 && s.h == 0 && s.w == 0;
    if (any_zero && !all_zero) {
        throw ShapeError("tensor extents may only be zero all together, got " + to_string(s));
    }
}

}  // namespace

Tensor::Tensor(Shape shape, float fill) : shape_(shape) {
    check_shape(shape_);
    data_.assign(static_cast<std::size_t>(shape_.numel()), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
    check_shape(shape_);
    if (static_cast<std::int64_t>(data_.size()) != shape_.numel()) {
        throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                         to_string(shape_));
    }
}

Tensor Tensor::batch_slice(std::int64_t begin, std::int64_t end) const {
    if (begin < 0 || end > shape_.n || begin >= end) {
        throw ShapeError("batch slice [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of range for " + to_string(shape_));
    }
    const auto item = shape_.c * shape_.h * shape_.w;
    std::vector<float> out(data_.begin() + begin * item, data_.begin() + end * item);
    return Tensor({end - begin, shape_.c, shape_.h, shape_.w}, std::move(out));
}

Tensor stack_batch(std::span<const Tensor> items) {
    if (items.empty()) throw ShapeError("stack_batch of an empty list");
    const Shape first = items.front().shape();
    std::vector<float> out;
    std::int64_t n = 0;
    for (const auto& t : items) {
        const Shape& s = t.shape();
        if (s.c != first.c || s.h != first.h || s.w != first.w) {
            throw ShapeError("stack_batch shape mismatch " + to_string(first) + " vs " + to_string(s));
        }
        out.insert(out.end(), t.data().begin(), t.data().end());
        n += s.n;
    }
    return Tensor({n, first.c, first.h, first.w}, std::move(out));
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) {
        throw ShapeError("max_abs_diff shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
    }
    float m = 0.0f;
    const auto da = a.data();
    const auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) {
        const float d = std::fabs(da[i] - db[i]);
        if (std::isnan(d)) return d;
        m = std::max(m, d);
    }
    return m;
}

}  // namespace rtsr

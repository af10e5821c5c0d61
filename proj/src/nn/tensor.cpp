#include "nnwd/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace nnwd {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ',';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    for (auto d : shape_) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
    }
}

Tensor::Tensor(Shape shape, const std::vector<double>& data) : Tensor(std::move(shape), Buffer(data.begin(), data.end())) {}

Tensor::Tensor(Shape shape, Buffer data) : shape_(std::move(shape)), data_(std::move(data)) {
    for (auto d : shape_) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape_));
    }
    if (shape_size(shape_) != data_.size()) {
        throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
    }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    if (rows.size() == 0) throw ShapeError("from_rows needs at least one row");
    const std::size_t width = rows.begin()->size();
    Buffer data;
    data.reserve(rows.size() * width);
    for (const auto& r : rows) {
        if (r.size() != width) throw ShapeError("from_rows: ragged rows");
        data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({rows.size(), width}, std::move(data));
}

std::size_t Tensor::rows() const { return shape_.size() < 2 ? 1 : shape_[0]; }

std::size_t Tensor::cols() const {
    if (shape_.size() < 2) return data_.size();
    return data_.size() / shape_[0];
}

std::span<double> Tensor::row(std::size_t r) {
    const auto c = cols();
    return std::span<double>(data_).subspan(r * c, c);
}

std::span<const double> Tensor::row(std::size_t r) const {
    const auto c = cols();
    return std::span<const double>(data_).subspan(r * c, c);
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_size(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor stack_rows(std::span<const std::vector<double>> rows, const Shape& row_shape) {
    const std::size_t width = shape_size(row_shape);
    Buffer data;
    data.reserve(rows.size() * width);
    for (const auto& r : rows) {
        if (r.size() != width) throw ShapeError("stack_rows: row length mismatch");
        data.insert(data.end(), r.begin(), r.end());
    }
    Shape shape{rows.size()};
    shape.insert(shape.end(), row_shape.begin(), row_shape.end());
    return Tensor(std::move(shape), std::move(data));
}

}  // namespace nnwd

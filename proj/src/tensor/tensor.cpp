#include "gcnv/tensor/tensor.hpp"

#include <cmath>
#include <sstream>

#include "gcnv/error.hpp"

namespace gcnv {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Shape: return "shape";
    case ErrorKind::NonFinite: return "non_finite";
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Degenerate: return "degenerate";
  }
  return "unknown";
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : shape_{}, storage_(std::make_shared<Storage>(Storage{{0.0}})) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (shape_numel(shape_) != values.size()) {
    fail(ErrorKind::Shape, "tensor shape " + shape_string(shape_) + " holds " +
                               std::to_string(shape_numel(shape_)) + " values, got " +
                               std::to_string(values.size()));
  }
  storage_ = std::make_shared<Storage>(Storage{std::move(values)});
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const auto n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    fail(ErrorKind::Shape, "axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape_));
  }
  return shape_[axis];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return storage_->values[row * shape_.back() + col];
}

double Tensor::item() const {
  if (numel() != 1) fail(ErrorKind::Shape, "item() on tensor of shape " + shape_string(shape_));
  return storage_->values[0];
}

bool Tensor::all_finite() const {
  if (storage_->finite_state < 0) {
    bool ok = true;
    for (double v : storage_->values) {
      if (!std::isfinite(v)) {
        ok = false;
        break;
      }
    }
    storage_->finite_state = ok ? 1 : 0;
  }
  return storage_->finite_state == 1;
}

Tensor Tensor::detach() const {
  Tensor t = *this;
  t.tape_ = nullptr;
  t.node_ = kNoNode;
  return t;
}

Tensor Tensor::with_shape(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    fail(ErrorKind::Shape, "cannot view shape " + shape_string(shape_) + " as " + shape_string(shape));
  }
  Tensor t = detach();
  t.shape_ = std::move(shape);
  return t;
}

}  // namespace gcnv

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gcnv {

using Shape = std::vector<std::size_t>;
using NodeId = std::size_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

class Tape;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Immutable row-major array of doubles. Copies share storage. A tensor may be
// attached to a Tape node, in which case operations on it are recorded.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return storage_->values.size(); }
  bool empty() const { return numel() == 0; }

  std::span<const double> values() const { return storage_->values; }
  double operator[](std::size_t flat) const { return storage_->values[flat]; }
  double at(std::size_t row, std::size_t col) const;
  double item() const;

  // True when every value is finite. Cached per storage.
  bool all_finite() const;

  bool tracked() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  NodeId node() const { return node_; }

  // Same values, no tape participation.
  Tensor detach() const;

  // Same values with a different shape of equal size (untracked view).
  Tensor with_shape(Shape shape) const;

 private:
  friend class Tape;

  struct Storage {
    std::vector<double> values;
    mutable int finite_state = -1;
  };

  Shape shape_;
  std::shared_ptr<const Storage> storage_;
  Tape* tape_ = nullptr;
  NodeId node_ = kNoNode;
};

}  // namespace gcnv

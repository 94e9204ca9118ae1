#pragma once

#include <functional>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "gcnv/tensor/tensor.hpp"

namespace gcnv {

// Accumulates d(out)/d(input_k) into input_grads[k] given d(out)/d(node).
// A null entry means that input does not need a gradient.
using BackwardFn =
    std::function<void(std::span<const double> grad_out, std::span<std::vector<double>*> input_grads)>;

// Gradients of a scalar with respect to every leaf of its tape.
class Gradients {
 public:
  bool empty() const { return by_node_.empty(); }
  std::size_t size() const { return by_node_.size(); }
  bool contains(const Tensor& leaf) const;
  // Gradient for a tracked leaf; throws for tensors not on the tape.
  const Tensor& of(const Tensor& leaf) const;

 private:
  friend class Tape;
  std::map<NodeId, Tensor> by_node_;
};

// Append-only record of a forward pass. Nodes are stored in creation order,
// which is a topological order because inputs must exist before outputs.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor leaf(const Tensor& value);

  // Registers `value` as the output of an operation over `inputs`. Inputs that
  // are not on this tape are treated as constants.
  Tensor record(Tensor value, std::string_view kind, std::span<const Tensor> inputs, BackwardFn backward);

  Gradients backward(const Tensor& output) const;

  std::size_t size() const { return nodes_.size(); }
  std::size_t leaf_count() const;
  std::string_view kind(NodeId id) const { return nodes_.at(id).kind; }

 private:
  struct Node {
    std::string_view kind;
    std::vector<NodeId> inputs;
    BackwardFn backward;
    Shape shape;
    bool leaf = false;
  };

  std::vector<Node> nodes_;
};

// Backward pass from a scalar; untracked outputs yield an empty gradient map.
Gradients backward(const Tensor& output);

}  // namespace gcnv

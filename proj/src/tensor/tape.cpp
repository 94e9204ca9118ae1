#include "gcnv/tensor/tape.hpp"

#include <algorithm>

#include "gcnv/error.hpp"

namespace gcnv {

bool Gradients::contains(const Tensor& leaf) const {
  return leaf.tracked() && by_node_.count(leaf.node()) > 0;
}

const Tensor& Gradients::of(const Tensor& leaf) const {
  auto it = leaf.tracked() ? by_node_.find(leaf.node()) : by_node_.end();
  if (it == by_node_.end()) fail(ErrorKind::InvalidArgument, "tensor is not a leaf of the differentiated tape");
  return it->second;
}

Tensor Tape::leaf(const Tensor& value) {
  Tensor t = value.detach();
  t.tape_ = this;
  t.node_ = nodes_.size();
  nodes_.push_back(Node{"leaf", {}, {}, value.shape(), true});
  return t;
}

Tensor Tape::record(Tensor value, std::string_view kind, std::span<const Tensor> inputs, BackwardFn backward) {
  Node node{kind, {}, std::move(backward), value.shape(), false};
  node.inputs.reserve(inputs.size());
  for (const auto& in : inputs) node.inputs.push_back(in.tape() == this ? in.node() : kNoNode);
  value.tape_ = this;
  value.node_ = nodes_.size();
  nodes_.push_back(std::move(node));
  return value;
}

std::size_t Tape::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.leaf; }));
}

Gradients Tape::backward(const Tensor& output) const {
  if (output.numel() != 1) {
    fail(ErrorKind::Shape, "backward needs a scalar output, got shape " + shape_string(output.shape()));
  }
  if (output.tape() != this) fail(ErrorKind::InvalidArgument, "output does not belong to this tape");

  std::vector<std::vector<double>> grads(output.node() + 1);
  grads[output.node()] = {1.0};

  std::vector<std::vector<double>*> input_grads;
  for (NodeId id = output.node() + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (node.leaf || grads[id].empty()) continue;
    input_grads.assign(node.inputs.size(), nullptr);
    bool any = false;
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const NodeId in = node.inputs[k];
      if (in == kNoNode) continue;
      if (grads[in].empty()) grads[in].assign(shape_numel(nodes_[in].shape), 0.0);
      input_grads[k] = &grads[in];
      any = true;
    }
    if (any) node.backward(grads[id], input_grads);
    // Interior gradients are no longer needed once propagated.
    std::vector<double>().swap(grads[id]);
  }

  Gradients result;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (!nodes_[id].leaf) continue;
    const auto n = shape_numel(nodes_[id].shape);
    if (id < grads.size() && !grads[id].empty()) {
      result.by_node_.emplace(id, Tensor(nodes_[id].shape, std::move(grads[id])));
    } else {
      result.by_node_.emplace(id, Tensor(nodes_[id].shape, std::vector<double>(n, 0.0)));
    }
  }
  return result;
}

Gradients backward(const Tensor& output) {
  if (output.numel() != 1) {
    fail(ErrorKind::Shape, "backward needs a scalar output, got shape " + shape_string(output.shape()));
  }
  if (!output.tracked()) return {};
  return output.tape()->backward(output);
}

}  // namespace gcnv

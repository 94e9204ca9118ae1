#include "gcnv/net/loss.hpp"

#include "gcnv/error.hpp"
#include "gcnv/tensor/ops.hpp"

namespace gcnv {

SegLoss seg_loss(const Tensor& logits, std::span<const int> labels) {
  require(logits.rank() >= 1, ErrorKind::Shape, "seg_loss: logits need a class axis");
  const std::size_t k = logits.shape().back();
  const std::size_t n = k == 0 ? 0 : logits.numel() / k;
  if (labels.size() != n) {
    fail(ErrorKind::Shape, "seg_loss: " + std::to_string(labels.size()) + " labels for logits " +
                               shape_string(logits.shape()));
  }
  require(n >= 1, ErrorKind::Shape, "seg_loss: empty prediction");
  std::vector<double> onehot(n * k, 0.0), gsum(k, kDiceSmooth);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      fail(ErrorKind::InvalidArgument, "seg_loss: label " + std::to_string(labels[i]) + " at voxel " +
                                           std::to_string(i) + " outside [0, " + std::to_string(k) + ")");
    }
    onehot[i * k + static_cast<std::size_t>(labels[i])] = 1.0;
    gsum[static_cast<std::size_t>(labels[i])] += 1.0;
  }
  const Tensor g({n, k}, std::move(onehot));
  const Tensor z = reshape(logits, {n, k});
  const Tensor p = softmax(z);

  const Tensor inter = sum_rows(mul(p, g));
  const Tensor dice = div(add_scalar(scale(inter, 2.0), kDiceSmooth), add(sum_rows(p), Tensor::vector(gsum)));
  SegLoss out;
  out.dice = add_scalar(scale(mean(dice), -1.0), 1.0);
  out.ce = scale(sum(mul(log_softmax(z), g)), -1.0 / static_cast<double>(n));
  out.total = add(out.dice, out.ce);
  return out;
}

}  // namespace gcnv

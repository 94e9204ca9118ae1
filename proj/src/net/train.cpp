#include "gcnv/net/train.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "gcnv/error.hpp"
#include "gcnv/tensor/ops.hpp"
#include "gcnv/tensor/tape.hpp"

namespace gcnv {

Tensor case_loss(const LabeledVolume& item, const ModelConfig& cfg, const ModelWeights& weights, TrainRecord* record) {
  const auto fwd = forward(item.volume, cfg, weights);
  const SegLoss seg = seg_loss(fwd.prediction.logits, item.labels);
  const Tensor rnv = soft_nonvoid_ratio(fwd.embedded, cfg.embed);
  const Tensor total = total_loss(seg.total, rnv, cfg.embed.lambda);
  if (record) {
    record->seg += seg.total.item();
    record->nonvoid_ratio += rnv.item();
    record->total += total.item();
  }
  return total;
}

TrainResult train_toy(std::span<const LabeledVolume> data, const ModelConfig& cfg, ModelWeights weights,
                      const TrainOptions& options) {
  require(options.steps >= 1, ErrorKind::InvalidArgument, "training needs at least one step");
  require(!data.empty(), ErrorKind::InvalidArgument, "training needs at least one case");
  require(options.learning_rate > 0.0, ErrorKind::InvalidArgument, "learning rate must be positive");
  const double inv_n = 1.0 / static_cast<double>(data.size());

  TrainResult result;
  for (std::size_t step = 0; step <= options.steps; ++step) {
    Tape tape;
    ModelWeights live = weights;
    live.for_each("", [&](const std::string&, Tensor& t) { t = tape.leaf(t); });

    TrainRecord rec;
    rec.step = step;
    Tensor loss;
    try {
      for (std::size_t i = 0; i < data.size(); ++i) {
        const Tensor l = case_loss(data[i], cfg, live, &rec);
        loss = i == 0 ? l : add(loss, l);
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFinite) throw;
      fail(ErrorKind::Divergence, "training diverged at step " + std::to_string(step) + ": " + e.what());
    }
    loss = scale(loss, inv_n);
    rec.seg *= inv_n;
    rec.nonvoid_ratio *= inv_n;
    rec.total *= inv_n;
    if (!std::isfinite(rec.total) || rec.total > 1e6) {
      fail(ErrorKind::Divergence, "training diverged at step " + std::to_string(step) + ": loss " +
                                      std::to_string(rec.total));
    }
    result.trajectory.push_back(rec);
    if (step == options.steps) break;

    const Gradients grads = backward(loss);
    std::vector<Tensor> updated;
    live.for_each("", [&](const std::string&, Tensor& t) {
      const auto g = grads.of(t).values();
      const auto v = t.values();
      std::vector<double> next(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) next[i] = v[i] - options.learning_rate * g[i];
      updated.emplace_back(t.shape(), std::move(next));
    });
    weights = assign_params(std::move(weights), updated);
  }
  result.weights = std::move(weights);
  return result;
}

std::string trajectory_csv(const std::vector<TrainRecord>& trajectory) {
  std::ostringstream os;
  os << "step,seg_loss,nonvoid_ratio,total_loss\n" << std::setprecision(17);
  for (const auto& r : trajectory) os << r.step << ',' << r.seg << ',' << r.nonvoid_ratio << ',' << r.total << '\n';
  return os.str();
}

}  // namespace gcnv

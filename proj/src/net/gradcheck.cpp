#include "gcnv/net/gradcheck.hpp"

#include "gcnv/tensor/ops.hpp"
#include "gcnv/tensor/random.hpp"
#include "gcnv/volume/phantom.hpp"

namespace gcnv {

NetGradCheck net_gradcheck(const ModelConfig& cfg, const NetGradCheckOptions& options) {
  cfg.validate();
  const Extents e{options.extent, options.extent, options.extent};
  cfg.check_extents(e);
  const Phantom p = generate_phantom(options.phantom_seed, default_phantom_spec(e, options.background));
  const LabeledVolume item{p.volume, p.labels};

  ModelWeights weights = init_weights(cfg, 1);
  Rng rng(options.jitter_seed);
  NetGradCheck out;
  weights.for_each("", [&](const std::string& name, Tensor& t) {
    out.names.push_back(name);
    if (name != "embed" && options.jitter > 0.0) {
      t = add(t, rng.uniform_tensor(t.shape(), -options.jitter, options.jitter));
    }
  });
  out.parameters = weights.parameter_count();

  const auto points = collect_params(weights);
  const ScalarFunction f = [&](std::span<const Tensor> in) {
    return case_loss(item, cfg, assign_params(weights, in), nullptr);
  };
  out.report = finite_diff_check(f, points, options.tolerance, options.step, options.order);
  return out;
}

}  // namespace gcnv

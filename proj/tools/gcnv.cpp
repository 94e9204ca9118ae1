// gcnv: command-line front end for the nonvoid segmentation pipeline.

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gcnv/defaults.hpp"
#include "gcnv/error.hpp"
#include "gcnv/metrics/metrics.hpp"
#include "gcnv/metrics/qea.hpp"
#include "gcnv/metrics/wilcoxon.hpp"
#include "gcnv/net/flops.hpp"
#include "gcnv/net/gradcheck.hpp"
#include "gcnv/net/train.hpp"
#include "gcnv/volume/phantom.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace gcnv;

namespace {

// ---- shared run plumbing ----

struct Common {
  std::string config_path;
  std::uint64_t seed = defaults::kSeed;
  bool seed_given = false;
  std::string out = defaults::kOutDir;
};

struct PhantomArgs {
  std::string input;
  std::size_t extent = defaults::kPhantomExtent;
  double background = defaults::kPhantomBackground;
  std::size_t modalities = defaults::kPhantomModalities;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_file(const fs::path& path) {
  const std::string data = read_text(path.string());
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    fail(ErrorKind::Io, "sha256 failed for " + path.string());
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

class Run {
 public:
  Run(std::string subcommand, const Common& common) : subcommand_(std::move(subcommand)), common_(common) {
    cfg_ = common.config_path.empty() ? ModelConfig::toy() : ModelConfig::from_json(read_text(common.config_path));
    if (common.seed_given) cfg_.seed = common.seed;
    cfg_.validate();
    fs::create_directories(common.out);
  }

  const ModelConfig& config() const { return cfg_; }
  ModelConfig& config() { return cfg_; }
  std::uint64_t seed() const { return cfg_.seed; }

  void arg(const std::string& key, ordered_json value) { args_[key] = std::move(value); }

  void write(const std::string& name, const std::string& text) {
    std::ofstream out(fs::path(common_.out) / name, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + (fs::path(common_.out) / name).string());
    out << text;
    outputs_.push_back(name);
  }
  // Files written by library calls (volumes, weight bundles).
  void record(const std::string& name) { outputs_.push_back(name); }
  fs::path path(const std::string& name) const { return fs::path(common_.out) / name; }

  void finish() {
    ordered_json m;
    m["subcommand"] = subcommand_;
    m["seed"] = cfg_.seed;
    m["arguments"] = args_;
    m["config"] = ordered_json::parse(cfg_.to_json());
    ordered_json hashes = ordered_json::object();
    std::sort(outputs_.begin(), outputs_.end());
    for (const auto& o : outputs_) hashes[o] = sha256_file(path(o));
    m["outputs"] = hashes;
    std::ofstream out(path("manifest.json"));
    out << m.dump(2) << "\n";
  }

 private:
  std::string subcommand_;
  Common common_;
  ModelConfig cfg_;
  ordered_json args_ = ordered_json::object();
  std::vector<std::string> outputs_;
};

struct Case {
  std::string name;
  DenseVolume volume;
  std::vector<int> labels;  // empty for external volumes
};

Case load_case(const PhantomArgs& pa, std::uint64_t seed, Run& run) {
  if (!pa.input.empty()) {
    run.arg("input", pa.input);
    return {fs::path(pa.input).stem().string(), read_volume(pa.input), {}};
  }
  run.arg("phantom", {{"extent", pa.extent}, {"background", pa.background}, {"modalities", pa.modalities}});
  const Extents e{pa.extent, pa.extent, pa.extent};
  Phantom p = generate_phantom(seed, default_phantom_spec(e, pa.background, pa.modalities));
  return {"phantom", std::move(p.volume), std::move(p.labels)};
}

void add_phantom_flags(CLI::App* sub, PhantomArgs& pa) {
  sub->add_option("--input", pa.input, "volume file (.json sidecar or .raw); default is a synthetic phantom");
  sub->add_option("--extent", pa.extent, "phantom side length")->capture_default_str();
  sub->add_option("--background", pa.background, "phantom background fraction")->capture_default_str();
  sub->add_option("--modalities", pa.modalities, "phantom channels")->capture_default_str();
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

// ---- subcommands ----

struct StatsArgs {
  std::string input_dir;
  std::vector<double> backgrounds = defaults::kStatsBackgrounds;
  std::size_t extent = defaults::kStatsExtent;
  std::size_t modalities = defaults::kPhantomModalities;
  double nonvoid = -1.0;
  double traditional = -1.0;
};

int cmd_voxelize_stats(const Common& common, const StatsArgs& a) {
  if (a.nonvoid >= 0.0 || a.traditional >= 0.0) {
    // Counts-only mode: no volumes involved.
    if (a.nonvoid < 0.0 || a.traditional < 0.0) fail(ErrorKind::InvalidArgument, "--nonvoid and --traditional go together");
    const double s = saving_from_counts(a.nonvoid, a.traditional);
    std::cout << "saving " << fixed(100.0 * s, 2) << "%\n";
    Run run("voxelize-stats", common);
    run.arg("nonvoid", a.nonvoid);
    run.arg("traditional", a.traditional);
    ordered_json j{{"nonvoid", a.nonvoid}, {"traditional", a.traditional}, {"saving_percent", 100.0 * s}};
    run.write("saving.json", j.dump(2) + "\n");
    run.finish();
    return 0;
  }

  Run run("voxelize-stats", common);
  std::vector<NamedVolume> volumes;
  ordered_json errors = ordered_json::array();
  if (!a.input_dir.empty()) {
    run.arg("input_dir", a.input_dir);
    if (!fs::is_directory(a.input_dir)) fail(ErrorKind::Io, "not a directory: " + a.input_dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(a.input_dir))
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) fail(ErrorKind::Io, "no volumes (*.json sidecars) in " + a.input_dir);
    for (const auto& f : files) {
      try {
        volumes.push_back({f.stem().string(), read_volume(f.string())});
      } catch (const Error& e) {
        std::cerr << ordered_json{{"file", f.string()}, {"error", std::string(to_string(e.kind()))}, {"message", e.what()}}.dump()
                  << "\n";
        errors.push_back({{"file", f.string()}, {"message", e.what()}});
      }
    }
    if (volumes.empty()) fail(ErrorKind::Io, "no readable volumes in " + a.input_dir);
  } else {
    run.arg("backgrounds", a.backgrounds);
    run.arg("extent", a.extent);
    run.arg("modalities", a.modalities);
    const Extents e{a.extent, a.extent, a.extent};
    for (std::size_t i = 0; i < a.backgrounds.size(); ++i) {
      Phantom p = generate_phantom(run.seed() + i, default_phantom_spec(e, a.backgrounds[i], a.modalities));
      volumes.push_back({"phantom_bg" + fixed(a.backgrounds[i], 2), std::move(p.volume)});
    }
  }
  const auto table = voxel_saving_stats(volumes, run.config().embed, run.seed());
  run.write("voxel_saving.csv", to_csv(table));
  run.write("voxel_saving.json", to_json(table));
  if (!errors.empty()) run.write("errors.json", errors.dump(2) + "\n");
  std::cout << to_csv(table);
  run.finish();
  return 0;
}

struct ForwardArgs {
  PhantomArgs phantom;
  std::string weights;
  bool dense = false;
  double nsd_tolerance = defaults::kNsdTolerance;
};

int cmd_forward(const Common& common, const ForwardArgs& a) {
  Run run("forward", common);
  const ModelConfig& cfg = run.config();
  Case c = load_case(a.phantom, run.seed(), run);
  run.arg("dense_forced", a.dense);
  const ModelWeights w = a.weights.empty() ? init_weights(cfg, c.volume.modalities())
                                           : load_weights(cfg, c.volume.modalities(), a.weights);
  if (!a.weights.empty()) run.arg("weights", a.weights);
  const ForwardResult f = forward(c.volume, cfg, w, {a.dense});

  const auto& e = c.volume.extents();
  const std::size_t n = c.volume.voxel_count(), k = cfg.classes;
  std::vector<int> pred(n);
  std::vector<double> pred_values(n);
  const auto& prob = f.prediction.probabilities;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (prob[i * k + j] > prob[i * k + best]) best = j;
    pred[i] = static_cast<int>(best);
    pred_values[i] = static_cast<double>(best);
  }
  write_volume(DenseVolume(Tensor({e[0], e[1], e[2], 1}, pred_values), c.volume.meta()), run.path("prediction.json").string());
  run.record("prediction.json");
  run.record("prediction.raw");

  ordered_json j;
  j["name"] = c.name;
  j["extents"] = e;
  j["embedded_sites"] = f.occupancy.bits.size();
  ordered_json levels = ordered_json::array();
  for (const auto& l : f.levels) levels.push_back(l.size());
  j["level_voxels"] = levels;
  j["flops"] = f.cost.total();
  j["attention_pairs"] = f.cost.attention_pairs;
  run.write("forward.json", j.dump(2) + "\n");

  if (!c.labels.empty()) {
    MetricReport m = evaluate_segmentation(e, pred, c.labels, k, a.nsd_tolerance);
    m.attention_pairs = f.cost.attention_pairs;
    m.flops = f.cost.total();
    run.write("metrics.csv", m.to_csv());
    run.write("metrics.json", m.to_json());
  }
  std::cout << j.dump() << "\n";
  run.finish();
  return 0;
}

struct TrainArgs {
  PhantomArgs phantom;
  std::size_t steps = defaults::kTrainSteps;
  double lr = defaults::kLearningRate;
  double lambda = -1.0;  // negative: keep the config value
};

int cmd_train_toy(const Common& common, const TrainArgs& a) {
  Run run("train-toy", common);
  if (a.lambda >= 0.0) run.config().embed.lambda = a.lambda;
  const ModelConfig& cfg = run.config();
  Case c = load_case(a.phantom, run.seed(), run);
  if (c.labels.empty()) fail(ErrorKind::InvalidArgument, "train-toy needs labels; use the built-in phantom");
  run.arg("steps", a.steps);
  run.arg("learning_rate", a.lr);
  const std::vector<LabeledVolume> data{{c.volume, c.labels}};
  const TrainResult r = train_toy(data, cfg, init_weights(cfg, c.volume.modalities()), {a.steps, a.lr});
  run.write("trajectory.csv", trajectory_csv(r.trajectory));
  save_weights(r.weights, run.path("weights.json").string());
  run.record("weights.json");
  run.record("weights.raw");
  const auto& first = r.trajectory.front();
  const auto& last = r.trajectory.back();
  ordered_json j{{"initial_total", first.total},
                 {"final_total", last.total},
                 {"reduction_percent", 100.0 * (1.0 - last.total / first.total)},
                 {"final_nonvoid_ratio", last.nonvoid_ratio}};
  run.write("summary.json", j.dump(2) + "\n");
  std::cout << j.dump() << "\n";
  run.finish();
  return 0;
}

struct GradArgs {
  NetGradCheckOptions options;
};

int cmd_gradcheck(const Common& common, const GradArgs& a) {
  Run run("gradcheck", common);
  NetGradCheckOptions o = a.options;
  o.phantom_seed = run.seed() + 2;
  o.jitter_seed = run.seed() + 99;
  run.arg("extent", o.extent);
  run.arg("jitter", o.jitter);
  run.arg("step", o.step);
  run.arg("order", o.order);
  run.arg("tolerance", o.tolerance);
  const NetGradCheck g = net_gradcheck(run.config(), o);
  ordered_json worst = nullptr;
  double worst_err = -1.0;
  for (const auto& c : g.report.coordinates)
    if (c.relative_error > worst_err) {
      worst_err = c.relative_error;
      worst = {{"parameter", g.names[c.input]}, {"index", c.index}, {"analytic", c.analytic}, {"numeric", c.numeric}};
    }
  ordered_json j{{"passed", g.report.passed},
                 {"worst_relative_error", g.report.worst_relative_error},
                 {"tolerance", g.report.tolerance},
                 {"coordinates", g.report.coordinates.size()},
                 {"parameters", g.parameters},
                 {"worst", worst}};
  run.write("gradcheck.json", j.dump(2) + "\n");
  run.finish();
  std::cout << g.report.summary() << "\n";
  return g.report.passed ? 0 : 3;
}

int cmd_flops(const Common& common, const PhantomArgs& pa) {
  Run run("flops", common);
  const ModelConfig& cfg = run.config();
  Case c = load_case(pa, run.seed(), run);
  const Tensor embed = init_embedding_weights(cfg.embed, c.volume.modalities(), cfg.seed);
  const FlopReport sparse = count_flops(cfg, structure_stats(c.volume, cfg, embed, false));
  const FlopReport dense = count_flops(cfg, structure_stats(c.volume, cfg, embed, true));
  const double saving = dense.total > 0 ? 100.0 * (1.0 - sparse.total / dense.total) : 0.0;
  ordered_json j{{"nonvoid", ordered_json::parse(sparse.to_json())},
                 {"dense_forced", ordered_json::parse(dense.to_json())},
                 {"saving_percent", saving}};
  run.write("flops.json", j.dump(2) + "\n");
  std::cout << "nonvoid_flops " << sparse.total << "\ndense_flops " << dense.total << "\nsaving " << fixed(saving, 2)
            << "%\n";
  run.finish();
  return 0;
}

int cmd_qea(const Common& common, const std::string& input) {
  Run run("qea", common);
  run.arg("input", input);
  const QeaResult r = qea(PolygonSpec::from_json(read_text(input)));
  run.write("qea.csv", r.to_csv());
  run.write("qea.json", r.to_json());
  std::cout << r.to_csv();
  run.finish();
  return 0;
}

struct SweepArgs {
  PhantomArgs phantom;
  std::vector<double> epsilons;
};

int cmd_eps_sweep(const Common& common, const SweepArgs& a) {
  Run run("eps-sweep", common);
  const ModelConfig& cfg = run.config();
  Case c = load_case(a.phantom, run.seed(), run);
  const std::vector<double> grid = a.epsilons.empty() ? default_epsilon_grid() : a.epsilons;
  run.arg("epsilons", grid);
  const Tensor embed = init_embedding_weights(cfg.embed, c.volume.modalities(), cfg.seed);
  const auto points = epsilon_sweep(c.volume, embed, cfg.embed, grid);
  std::ostringstream csv;
  csv << std::setprecision(12) << "epsilon,nonvoid,saving_percent\n";
  ordered_json j = ordered_json::array();
  for (const auto& p : points) {
    csv << p.epsilon << ',' << p.nonvoid << ',' << 100.0 * p.saving << '\n';
    j.push_back({{"epsilon", p.epsilon}, {"nonvoid", p.nonvoid}, {"saving_percent", 100.0 * p.saving}});
  }
  run.write("eps_sweep.csv", csv.str());
  run.write("eps_sweep.json", j.dump(2) + "\n");
  std::cout << csv.str();
  run.finish();
  return 0;
}

struct SignificanceArgs {
  std::string input;
  double alpha = defaults::kAlpha;
};

int cmd_significance(const Common& common, const SignificanceArgs& a) {
  Run run("significance", common);
  run.arg("input", a.input);
  run.arg("alpha", a.alpha);
  std::vector<Comparison> comps;
  try {
    const auto j = nlohmann::json::parse(read_text(a.input));
    for (const auto& c : j.at("comparisons")) {
      comps.push_back({c.at("name").get<std::string>(), c.at("a").get<std::vector<double>>(),
                       c.at("b").get<std::vector<double>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("comparisons file: ") + e.what());
  }
  const auto results = wilcoxon_holm(comps, a.alpha);
  run.write("significance.csv", to_csv(results));
  run.write("significance.json", to_json(results));
  std::cout << to_csv(results);
  run.finish();
  return 0;
}

void error_line(const std::string& kind, const std::string& message) {
  std::cerr << ordered_json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonvoid voxelization and sparse segmentation toolkit"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "model config JSON (default: toy config)")->check(CLI::ExistingFile);
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { common.seed = s, common.seed_given = true; },
        "seed for weights and phantoms (overrides the config)");
    sub->add_option("--out", common.out, "output directory")->capture_default_str();
  };

  StatsArgs stats;
  auto* s_stats = app.add_subcommand("voxelize-stats", "voxel-saving table for phantoms or a directory of volumes");
  add_common(s_stats);
  s_stats->add_option("--input-dir", stats.input_dir, "directory of volumes");
  s_stats->add_option("--backgrounds", stats.backgrounds, "phantom background fractions")->delimiter(',');
  s_stats->add_option("--extent", stats.extent, "phantom side length")->capture_default_str();
  s_stats->add_option("--modalities", stats.modalities, "phantom channels")->capture_default_str();
  s_stats->add_option("--nonvoid", stats.nonvoid, "counts-only mode: nonvoid voxel count");
  s_stats->add_option("--traditional", stats.traditional, "counts-only mode: traditional voxel count");

  ForwardArgs fwd;
  auto* s_fwd = app.add_subcommand("forward", "run the network and score the prediction");
  add_common(s_fwd);
  add_phantom_flags(s_fwd, fwd.phantom);
  s_fwd->add_option("--weights", fwd.weights, "weight bundle from train-toy");
  s_fwd->add_flag("--dense-forced", fwd.dense, "process every embedded site");
  s_fwd->add_option("--nsd-tolerance", fwd.nsd_tolerance, "NSD tolerance in voxels")->capture_default_str();

  TrainArgs train;
  auto* s_train = app.add_subcommand("train-toy", "gradient descent on a labelled phantom");
  add_common(s_train);
  add_phantom_flags(s_train, train.phantom);
  s_train->add_option("--steps", train.steps)->capture_default_str();
  s_train->add_option("--lr", train.lr)->capture_default_str();
  s_train->add_option("--lambda", train.lambda, "soft nonvoid weight (default: from config)");

  GradArgs grad;
  grad.options.extent = defaults::kGradcheckExtent;
  grad.options.jitter = defaults::kGradcheckJitter;
  grad.options.step = defaults::kGradcheckStep;
  grad.options.order = defaults::kGradcheckOrder;
  grad.options.tolerance = defaults::kGradcheckTolerance;
  auto* s_grad = app.add_subcommand("gradcheck", "finite-difference check of the full training loss");
  add_common(s_grad);
  s_grad->add_option("--extent", grad.options.extent)->capture_default_str();
  s_grad->add_option("--jitter", grad.options.jitter)->capture_default_str();
  s_grad->add_option("--step", grad.options.step)->capture_default_str();
  s_grad->add_option("--order", grad.options.order, "finite-difference order, 2 or 4")->capture_default_str();
  s_grad->add_option("--tolerance", grad.options.tolerance)->capture_default_str();

  PhantomArgs flops;
  auto* s_flops = app.add_subcommand("flops", "FLOPs of the nonvoid path against dense processing");
  add_common(s_flops);
  add_phantom_flags(s_flops, flops);

  std::string qea_input;
  auto* s_qea = app.add_subcommand("qea", "normalized polygon areas from a method table");
  add_common(s_qea);
  s_qea->add_option("--input", qea_input, "polygon spec JSON")->required()->check(CLI::ExistingFile);

  SweepArgs sweep;
  auto* s_sweep = app.add_subcommand("eps-sweep", "voxel saving across occupancy thresholds");
  add_common(s_sweep);
  add_phantom_flags(s_sweep, sweep.phantom);
  s_sweep->add_option("--epsilons", sweep.epsilons, "threshold grid (default: decades 1e-11..1e1)")->delimiter(',');

  SignificanceArgs sig;
  auto* s_sig = app.add_subcommand("significance", "paired signed-rank tests with Holm correction");
  add_common(s_sig);
  s_sig->add_option("--input", sig.input, "comparisons JSON")->required()->check(CLI::ExistingFile);
  s_sig->add_option("--alpha", sig.alpha)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_line("usage", e.what());
    return 2;
  }

  try {
    if (*s_stats) return cmd_voxelize_stats(common, stats);
    if (*s_fwd) return cmd_forward(common, fwd);
    if (*s_train) return cmd_train_toy(common, train);
    if (*s_grad) return cmd_gradcheck(common, grad);
    if (*s_flops) return cmd_flops(common, flops);
    if (*s_qea) return cmd_qea(common, qea_input);
    if (*s_sweep) return cmd_eps_sweep(common, sweep);
    if (*s_sig) return cmd_significance(common, sig);
  } catch (const Error& e) {
    error_line(std::string(to_string(e.kind())), e.what());
    return 1;
  } catch (const std::exception& e) {
    error_line("internal", e.what());
    return 1;
  }
  return 0;
}

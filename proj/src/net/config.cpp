#include "gcnv/net/config.hpp"

#include <json.hpp>

#include "gcnv/error.hpp"

namespace gcnv {

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.stages = 2;
  c.channels = {12, 24};
  c.window = {4, 4};
  c.capacity = {16, 16};
  return c;
}

void ModelConfig::validate() const {
  require(stages >= 1, ErrorKind::InvalidArgument, "model needs at least one stage");
  if (channels.size() != stages || window.size() != stages || capacity.size() != stages) {
    fail(ErrorKind::InvalidArgument, "channels, window and capacity need one entry per stage (" +
                                         std::to_string(stages) + ")");
  }
  require(heads >= 1, ErrorKind::InvalidArgument, "heads must be >= 1");
  for (std::size_t i = 0; i < stages; ++i) {
    if (channels[i] == 0 || channels[i] % 6 != 0 || channels[i] % heads != 0) {
      fail(ErrorKind::InvalidArgument, "stage " + std::to_string(i) + ": channels " + std::to_string(channels[i]) +
                                           " must be divisible by 6 and by heads (" + std::to_string(heads) + ")");
    }
    require(window[i] >= 1, ErrorKind::InvalidArgument, "window sizes must be >= 1");
    require(capacity[i] >= 1, ErrorKind::InvalidArgument, "subset capacities must be >= 1");
  }
  require(pool >= 1, ErrorKind::InvalidArgument, "pooling stride must be >= 1");
  require(classes >= 2, ErrorKind::InvalidArgument, "need at least two classes");
  require(conv_levels <= stages, ErrorKind::InvalidArgument, "conv_levels cannot exceed the number of stages");
  embed.validate();
  if (embed.channels != channels[0]) {
    fail(ErrorKind::InvalidArgument, "embedding channels (" + std::to_string(embed.channels) +
                                         ") must equal stage 0 channels (" + std::to_string(channels[0]) + ")");
  }
  BlockConfig{channels[0], heads, mlp_ratio}.validate();
}

std::size_t ModelConfig::level_channels(std::size_t level) const { return channels[std::min(level, stages - 1)]; }

BlockConfig ModelConfig::level_block(std::size_t level) const { return {level_channels(level), heads, mlp_ratio}; }

TdnvtConfig ModelConfig::level_tdnvt(std::size_t level) const {
  const std::size_t s = std::min(level, stages - 1);
  TdnvtConfig t;
  t.block = level_block(level);
  t.window = window[s];
  t.capacity = capacity[s];
  t.schedule = schedule;
  return t;
}

std::size_t ModelConfig::required_divisor() const {
  std::size_t d = embed.stride;
  for (std::size_t i = 0; i < stages; ++i) d *= static_cast<std::size_t>(pool);
  return d;
}

void ModelConfig::check_extents(const Extents& e) const {
  const std::size_t d = required_divisor();
  bool ok = true;
  for (auto x : e) ok = ok && x % d == 0 && x >= embed.kernel;
  if (!ok) {
    fail(ErrorKind::InvalidArgument, "extents (" + std::to_string(e[0]) + ", " + std::to_string(e[1]) + ", " +
                                         std::to_string(e[2]) + ") incompatible: each must be a multiple of " +
                                         std::to_string(d) + " = stride " + std::to_string(embed.stride) +
                                         " x pool " + std::to_string(pool) + "^" + std::to_string(stages));
  }
}

std::string ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["stages"] = stages;
  j["channels"] = channels;
  j["window"] = window;
  j["capacity"] = capacity;
  j["pool"] = pool;
  j["classes"] = classes;
  j["heads"] = heads;
  j["mlp_ratio"] = mlp_ratio;
  j["conv_levels"] = conv_levels;
  j["schedule"] = schedule == DirectionSchedule::Sequential ? "sequential" : "parallel";
  j["embed"] = {{"kernel", embed.kernel},           {"stride", embed.stride},
                {"channels", embed.channels},       {"epsilon", embed.epsilon},
                {"norm_order", embed.norm_order},   {"temperature", embed.temperature},
                {"lambda", embed.lambda}};
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("model config: ") + e.what());
  }
  require(j.is_object(), ErrorKind::Format, "model config must be a JSON object");
  ModelConfig c = toy();
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("stages", c.stages);
    get("channels", c.channels);
    get("window", c.window);
    get("capacity", c.capacity);
    get("pool", c.pool);
    get("classes", c.classes);
    get("heads", c.heads);
    get("mlp_ratio", c.mlp_ratio);
    get("conv_levels", c.conv_levels);
    get("seed", c.seed);
    if (j.contains("schedule")) {
      const auto s = j.at("schedule").get<std::string>();
      if (s == "sequential") c.schedule = DirectionSchedule::Sequential;
      else if (s == "parallel") c.schedule = DirectionSchedule::Parallel;
      else fail(ErrorKind::Format, "model config: unknown schedule '" + s + "'");
    }
    c.embed.channels = c.channels.empty() ? 0 : c.channels[0];
    if (j.contains("embed")) {
      const auto& e = j.at("embed");
      auto eget = [&](const char* key, auto& field) {
        if (e.contains(key)) field = e.at(key).get<std::decay_t<decltype(field)>>();
      };
      eget("kernel", c.embed.kernel);
      eget("stride", c.embed.stride);
      eget("channels", c.embed.channels);
      eget("epsilon", c.embed.epsilon);
      eget("norm_order", c.embed.norm_order);
      eget("temperature", c.embed.temperature);
      eget("lambda", c.embed.lambda);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace gcnv

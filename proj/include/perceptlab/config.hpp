// Copyright 2026 The PerceptLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Training configuration and its flat JSON form.

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "perceptlab/distortions.hpp"
#include "perceptlab/error.hpp"
#include "perceptlab/model.hpp"
#include "perceptlab/objectives.hpp"

namespace perceptlab {

using json = nlohmann::json;

struct TrainConfig {
  LossSpec objective;
  DistortionSpec distortion;
  double learning_rate = 3e-4;
  int batch_size = 8;
  int steps = 2000;
  std::uint64_t seed = 0;
  int patch_size = 64;
  std::string corpus_path;

  // Size of a fixed patch pool drawn once from the corpus; 0 streams fresh
  // crops every step.
  int num_patches = 0;
  int checkpoint_every = 500;
  // Plateau rule on the smoothed loss: stop when the relative improvement
  // over early_stop_window steps drops below early_stop_tolerance.
  // A window of 0 disables early stopping.
  int early_stop_window = 500;
  double early_stop_tolerance = 1e-4;
  int smoothing_window = 50;
  double gamma_init = 1e-3;
  Architecture architecture = perceptnet_architecture();

  bool operator==(const TrainConfig&) const = default;

  void validate() const {
    try {
      objective.validate();
      distortion.validate();
    } catch (const ArgumentError& e) {
      throw ConfigError(e.what());
    }
    const DistortionKind implied = implied_distortion(objective.objective);
    if (distortion.kind != implied) {
      throw ConfigError(std::string("objective '") + to_string(objective.objective) +
                        "' requires distortion '" + to_string(implied) + "', got '" +
                        to_string(distortion.kind) + "'");
    }
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw ConfigError("learning_rate must be >= 0");
    }
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (steps <= 0) throw ConfigError("steps must be positive");
    validate_architecture(architecture);
    const int block = 1 << architecture.pooling_stages();
    if (patch_size < 16 || patch_size % 2 != 0 || patch_size % block != 0) {
      throw ConfigError("patch_size must be even, >= 16 and divisible by " +
                        std::to_string(block));
    }
    if (num_patches < 0) throw ConfigError("num_patches must be >= 0");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
    if (early_stop_window < 0) throw ConfigError("early_stop_window must be >= 0");
    if (smoothing_window <= 0) throw ConfigError("smoothing_window must be positive");
    if (!(gamma_init >= 0.0)) throw ConfigError("gamma_init must be >= 0");
  }
};

inline json architecture_to_json(const Architecture& a) {
  json stages = json::array();
  for (const auto& s : a.encoder) {
    json j{{"type", to_string(s.kind)}, {"name", s.name}};
    if (s.kind == StageKind::conv) {
      j["in"] = s.in_channels;
      j["out"] = s.out_channels;
      j["kernel"] = s.kernel_size;
    } else if (s.kind == StageKind::gdn || s.kind == StageKind::igdn) {
      j["channels"] = s.channels;
    }
    stages.push_back(std::move(j));
  }
  return json{{"stages", stages}, {"alpha", a.alpha}, {"epsilon", a.epsilon}};
}

inline Architecture architecture_from_json(const json& j) {
  try {
    if (j.is_string()) {
      if (j.get<std::string>() == "perceptnet") return perceptnet_architecture();
      throw ConfigError("unknown architecture preset '" + j.get<std::string>() + "'");
    }
    Architecture a;
    a.alpha = j.value("alpha", 2.0);
    a.epsilon = j.value("epsilon", 0.5);
    for (const auto& s : j.at("stages")) {
      StageDescriptor d;
      d.kind = stage_kind_from_string(s.at("type").get<std::string>());
      d.name = s.at("name").get<std::string>();
      if (d.kind == StageKind::conv) {
        d.in_channels = s.at("in").get<int>();
        d.out_channels = s.at("out").get<int>();
        d.kernel_size = s.at("kernel").get<int>();
      } else if (d.kind == StageKind::gdn || d.kind == StageKind::igdn) {
        d.channels = s.at("channels").get<int>();
      }
      a.encoder.push_back(std::move(d));
    }
    validate_architecture(a);
    return a;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid architecture: ") + e.what());
  }
}

inline json to_json(const TrainConfig& c) {
  return json{
      {"objective", to_string(c.objective.objective)},
      {"lambda", c.objective.lambda},
      {"distortion", to_string(c.distortion.kind)},
      {"sigma", c.distortion.sigma},
      {"learning_rate", c.learning_rate},
      {"batch_size", c.batch_size},
      {"steps", c.steps},
      {"seed", c.seed},
      {"patch_size", c.patch_size},
      {"corpus_path", c.corpus_path},
      {"num_patches", c.num_patches},
      {"checkpoint_every", c.checkpoint_every},
      {"early_stop_window", c.early_stop_window},
      {"early_stop_tolerance", c.early_stop_tolerance},
      {"smoothing_window", c.smoothing_window},
      {"gamma_init", c.gamma_init},
      {"architecture", architecture_to_json(c.architecture)},
  };
}

/// Parses the flat config document. `extra_keys` are tolerated and ignored
/// (the sweep file adds its own keys); any other unknown key is an error.
inline TrainConfig train_config_from_json(const json& j,
                                          const std::set<std::string>& extra_keys = {}) {
  static const std::set<std::string> known = {
      "objective",        "lambda",           "distortion",          "sigma",
      "learning_rate",    "batch_size",       "steps",               "seed",
      "patch_size",       "corpus_path",      "num_patches",         "checkpoint_every",
      "early_stop_window", "early_stop_tolerance", "smoothing_window", "gamma_init",
      "architecture"};
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key) && !extra_keys.contains(key)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  TrainConfig c;
  try {
    c.objective.objective = objective_from_string(j.value("objective", std::string("reconstruction")));
    c.objective.lambda = j.value("lambda", 0.0);
    c.distortion.kind = j.contains("distortion")
                            ? distortion_kind_from_string(j.at("distortion").get<std::string>())
                            : implied_distortion(c.objective.objective);
    c.distortion.sigma = j.value("sigma", 0.0);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.steps = j.value("steps", c.steps);
    c.seed = j.value("seed", c.seed);
    c.patch_size = j.value("patch_size", c.patch_size);
    c.corpus_path = j.value("corpus_path", c.corpus_path);
    c.num_patches = j.value("num_patches", c.num_patches);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.early_stop_window = j.value("early_stop_window", c.early_stop_window);
    c.early_stop_tolerance = j.value("early_stop_tolerance", c.early_stop_tolerance);
    c.smoothing_window = j.value("smoothing_window", c.smoothing_window);
    c.gamma_init = j.value("gamma_init", c.gamma_init);
    if (j.contains("architecture")) c.architecture = architecture_from_json(j.at("architecture"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace perceptlab

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "ct3d/model.hpp"
#include "ct3d/scene.hpp"
#include "ct3d/training.hpp"

namespace ct3d {

struct OptimConfig {
  double max_lr = 1e-3;
  std::size_t epochs = 30;
  std::size_t batch = 4;  // scenes per step
  std::size_t warmup_steps = 0;
};

struct EvalConfig {
  double iou_thr = 0.7;
  int recall_positions = 40;
  std::size_t top_k = 100;
  bool nms = true;
  double nms_iou = 0.1;
};

struct DataConfig {
  std::size_t train_scenes = 200;
  std::size_t eval_scenes = 50;
  SceneConfig scene;
};

// Everything a run needs. File form is JSON with sections "model", "targets",
// "optim", "rpn_sim", "eval", "data" and "runtime"; missing keys keep defaults.
struct RunConfig {
  ModelConfig model;
  TargetConfig targets;
  OptimConfig optim;
  RpnNoiseConfig rpn_sim;
  EvalConfig eval;
  DataConfig data;
  std::size_t threads = 1;
};

// Throws ConfigError on the first violated constraint.
void validate(const RunConfig& cfg);

RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& cfg);

}  // namespace ct3d

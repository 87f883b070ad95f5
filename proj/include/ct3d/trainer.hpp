#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ct3d/config.hpp"
#include "ct3d/evaluation.hpp"
#include "ct3d/gradcheck.hpp"
#include "ct3d/model.hpp"
#include "ct3d/scene.hpp"
#include "ct3d/training.hpp"

namespace ct3d {

// Seed stream tags, so train and eval draws never collide.
enum class SeedTag : std::uint64_t {
  model_init = 1,
  train_scene = 2,
  eval_scene = 3,
  shuffle = 4,
  train_rpn = 5,
  match = 6,
  roi_sample = 7,
  eval_rpn = 8,
  eval_roi = 9,
};

std::uint64_t tagged_seed(std::uint64_t base, SeedTag tag, std::initializer_list<std::uint64_t> rest = {});

// Scene i of the train or eval split for a run seed.
std::vector<Scene> make_scenes(const SceneConfig& cfg, std::uint64_t seed, SeedTag split,
                               std::size_t count);

struct LossBreakdown {
  double total = 0.0;
  double conf = 0.0;
  double reg = 0.0;
  // Combined Tape::branch_signature of all records, in record order.
  std::uint64_t branch_signature = 0;
};

// Refinement loss of one scene: mean BCE over the sampled records plus the
// smooth-L1 regression loss averaged over the regression subset. When `grads`
// is given, `weight`·∂loss/∂θ is added to it. RoI sampling for record r uses
// roi_seed(r.proposal_index).
LossBreakdown scene_loss(const Model& model, const PointCloud& cloud, const TrainBatch& batch,
                         const std::function<std::uint64_t(std::size_t)>& roi_seed,
                         num::GradBuffer* grads = nullptr, double weight = 1.0,
                         std::size_t threads = 1);

struct MetricsRow {
  std::size_t step = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_conf = 0.0;
  double loss_reg = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<MetricsRow> metrics;
};

using ProgressFn = std::function<void(const MetricsRow& row, std::size_t total_steps)>;

// Refinement-only training with ADAM and a cosine schedule. Validates the
// config before any compute.
TrainResult train(const RunConfig& cfg, std::uint64_t seed, std::span<const Scene> scenes,
                  const ProgressFn& progress = {});

std::size_t steps_per_epoch(std::size_t scene_count, std::size_t batch);

std::string metrics_csv(std::span<const MetricsRow> rows);
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows);

struct EvalSummary {
  EvalReport refined;
  EvalReport baseline;
  // Over proposals entering refinement whose best IoU with a ground truth is
  // positive; the refined box is scored against that same ground truth.
  double mean_proposal_iou = 0.0;
  double mean_refined_iou = 0.0;
  std::size_t matched_proposals = 0;
};

// Proposals are simulated per eval scene from `seed`, so two models evaluated
// with the same seed see identical inputs.
EvalSummary evaluate_model(const Model& model, std::span<const Scene> scenes, const RunConfig& cfg,
                           std::uint64_t seed);

std::string eval_csv(const EvalReport& report);

struct LossGradCheck {
  num::GradCheckResult result;
  LossBreakdown loss;
  std::size_t records = 0;
  std::size_t reg_records = 0;
};

// Gradient check of the full refinement loss on a small random scene.
LossGradCheck full_loss_gradcheck(const ModelConfig& model_cfg, std::uint64_t seed,
                                  std::size_t samples = 200, double eps = 1e-4);

}  // namespace ct3d

#include "ct3d/trainer.hpp"

#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "ct3d/detection.hpp"
#include "ct3d/errors.hpp"
#include "ct3d/optim.hpp"
#include "ct3d/seed.hpp"
#include "parallel.hpp"

namespace ct3d {

namespace {

constexpr std::size_t kRecordsPerChunk = 4;

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::uint64_t tagged_seed(std::uint64_t base, SeedTag tag, std::initializer_list<std::uint64_t> rest) {
  std::uint64_t s = derive_seed(base, {static_cast<std::uint64_t>(tag)});
  return rest.size() == 0 ? s : derive_seed(s, rest);
}

std::vector<Scene> make_scenes(const SceneConfig& cfg, std::uint64_t seed, SeedTag split,
                               std::size_t count) {
  std::vector<Scene> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Scene s = generate_scene(cfg, tagged_seed(seed, split, {i}));
    s.scene_id = (split == SeedTag::eval_scene ? "eval_" : "train_") + std::to_string(i);
    scenes.push_back(std::move(s));
  }
  return scenes;
}

LossBreakdown scene_loss(const Model& model, const PointCloud& cloud, const TrainBatch& batch,
                         const std::function<std::uint64_t(std::size_t)>& roi_seed,
                         num::GradBuffer* grads, double weight, std::size_t threads) {
  const std::size_t n = batch.records.size();
  if (n == 0) return {};
  const std::size_t n_reg = batch.reg_count();
  const double w_conf = weight / static_cast<double>(n);
  const double w_reg = weight / static_cast<double>(std::max<std::size_t>(1, n_reg));

  std::vector<double> conf(n, 0.0), reg(n, 0.0);
  std::vector<std::uint64_t> branches(n, 0);
  const std::size_t chunks = (n + kRecordsPerChunk - 1) / kRecordsPerChunk;
  std::vector<num::GradBuffer> chunk_grads(grads ? chunks : 0);

  detail::parallel_for(chunks, threads, [&](std::size_t c) {
    if (grads) chunk_grads[c] = model.params().make_grad_buffer();
    const std::size_t end = std::min(n, (c + 1) * kRecordsPerChunk);
    for (std::size_t i = c * kRecordsPerChunk; i < end; ++i) {
      const TrainRecord& rec = batch.records[i];
      num::Tape tape(grads ? num::Tape::Mode::record : num::Tape::Mode::inference);
      const RoiSample sample = model.sample(cloud, rec.proposal, roi_seed(rec.proposal_index));
      const HeadOutputs out = model.forward(tape, sample);
      const num::Var lc = tape.bce_with_logits(out.logit, rec.conf_target);
      conf[i] = tape.value(lc)[0];
      num::Var loss = tape.scale(lc, w_conf);
      if (rec.in_reg_set) {
        const auto target = rec.residual_targets->to_array();
        const num::Var lr = tape.smooth_l1_sum(out.residuals, target);
        reg[i] = tape.value(lr)[0];
        loss = tape.add(loss, tape.scale(lr, w_reg));
      }
      branches[i] = tape.branch_signature();
      if (grads) {
        tape.backward(loss);
        tape.collect_param_grads(chunk_grads[c]);
      }
    }
  });

  if (grads)
    for (const num::GradBuffer& g : chunk_grads) grads->add(g);

  LossBreakdown l;
  for (double v : conf) l.conf += v;
  for (double v : reg) l.reg += v;
  l.conf /= static_cast<double>(n);
  l.reg /= static_cast<double>(std::max<std::size_t>(1, n_reg));
  l.total = total_loss(l.conf, l.reg);
  for (std::uint64_t b : branches) l.branch_signature = splitmix64(l.branch_signature ^ b);
  return l;
}

std::size_t steps_per_epoch(std::size_t scene_count, std::size_t batch) {
  return (scene_count + batch - 1) / batch;
}

TrainResult train(const RunConfig& cfg, std::uint64_t seed, std::span<const Scene> scenes,
                  const ProgressFn& progress) {
  validate(cfg);
  if (scenes.empty()) throw ConfigError("train: no training scenes");

  TrainResult result{Model(cfg.model, tagged_seed(seed, SeedTag::model_init)), {}};
  Model& model = result.model;
  num::ParamStore& store = model.params();

  const std::size_t per_epoch = steps_per_epoch(scenes.size(), cfg.optim.batch);
  const std::size_t total_steps = cfg.optim.epochs * per_epoch;
  num::LrSchedule schedule;
  schedule.max_lr = cfg.optim.max_lr;
  schedule.total_steps = std::max<std::size_t>(1, total_steps);
  schedule.warmup_steps = cfg.optim.warmup_steps;
  num::validate(schedule);

  std::size_t step = 0;
  std::vector<std::size_t> order(scenes.size());
  for (std::size_t epoch = 0; epoch < cfg.optim.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(tagged_seed(seed, SeedTag::shuffle, {epoch}));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(shuffle_rng)]);
    }

    for (std::size_t b = 0; b < per_epoch; ++b, ++step) {
      struct Item {
        std::size_t scene;
        TrainBatch batch;
      };
      std::vector<Item> items;
      const std::size_t end = std::min(order.size(), (b + 1) * cfg.optim.batch);
      for (std::size_t k = b * cfg.optim.batch; k < end; ++k) {
        const std::size_t sid = order[k];
        const ProposalSet props = simulate_rpn(scenes[sid], cfg.rpn_sim, cfg.data.scene,
                                               tagged_seed(seed, SeedTag::train_rpn, {step, sid}));
        if (props.size() == 0) continue;
        items.push_back({sid, match_and_sample(props.boxes, scenes[sid].gt_boxes, cfg.targets,
                                               tagged_seed(seed, SeedTag::match, {step, sid}))});
      }

      MetricsRow row;
      row.step = step;
      row.lr = num::cosine_lr(schedule, step);
      if (!items.empty()) {
        const double weight = 1.0 / static_cast<double>(items.size());
        num::GradBuffer grads = store.make_grad_buffer();
        for (const Item& it : items) {
          const auto roi_seed = [&](std::size_t idx) {
            return tagged_seed(seed, SeedTag::roi_sample, {step, it.scene, idx});
          };
          const LossBreakdown l = scene_loss(model, scenes[it.scene].cloud, it.batch, roi_seed,
                                             &grads, weight, cfg.threads);
          row.loss_total += weight * l.total;
          row.loss_conf += weight * l.conf;
          row.loss_reg += weight * l.reg;
        }
        store.zero_grad();
        store.accumulate_grad(grads);
        num::adam_step(store, row.lr);
      }
      result.metrics.push_back(row);
      if (progress) progress(row, total_steps);
    }
  }
  return result;
}

std::string metrics_csv(std::span<const MetricsRow> rows) {
  std::string out = "step,lr,loss_total,loss_conf,loss_reg\n";
  for (const MetricsRow& r : rows) {
    out += std::to_string(r.step) + ',' + format_double(r.lr) + ',' + format_double(r.loss_total) +
           ',' + format_double(r.loss_conf) + ',' + format_double(r.loss_reg) + '\n';
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << metrics_csv(rows);
  if (!out) throw IoError("write failed: " + path.string());
}

EvalSummary evaluate_model(const Model& model, std::span<const Scene> scenes, const RunConfig& cfg,
                           std::uint64_t seed) {
  struct PerScene {
    std::vector<Detection> refined;
    std::vector<Detection> baseline;
    std::vector<double> proposal_iou;
    std::vector<double> refined_iou;
  };
  std::vector<PerScene> per(scenes.size());

  detail::parallel_for(scenes.size(), cfg.threads, [&](std::size_t i) {
    const Scene& scene = scenes[i];
    const ProposalSet props =
        simulate_rpn(scene, cfg.rpn_sim, cfg.data.scene, tagged_seed(seed, SeedTag::eval_rpn, {i}));
    RefineConfig rc;
    rc.top_k = cfg.eval.top_k;
    rc.nms = cfg.eval.nms;
    rc.nms_iou = cfg.eval.nms_iou;
    rc.seed = tagged_seed(seed, SeedTag::eval_roi, {i});

    PerScene& out = per[i];
    std::vector<Detection> dets;
    for (const RefinedProposal& r : refine_proposals(scene.cloud, props, model, rc)) {
      dets.push_back({r.refined, r.confidence});
      double best = 0.0;
      std::size_t best_gt = 0;
      for (std::size_t g = 0; g < scene.gt_boxes.size(); ++g) {
        const double iou = iou_3d(r.proposal, scene.gt_boxes[g]);
        if (iou > best) {
          best = iou;
          best_gt = g;
        }
      }
      if (best > 0.0) {
        out.proposal_iou.push_back(best);
        out.refined_iou.push_back(iou_3d(r.refined, scene.gt_boxes[best_gt]));
      }
    }
    out.refined = suppress_detections(std::move(dets), rc);
    out.baseline = proposals_as_detections(props, rc);
  });

  std::vector<std::vector<Detection>> refined, baseline;
  std::vector<std::vector<Box3D>> gts;
  EvalSummary s;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    refined.push_back(std::move(per[i].refined));
    baseline.push_back(std::move(per[i].baseline));
    gts.push_back(scenes[i].gt_boxes);
    for (std::size_t k = 0; k < per[i].proposal_iou.size(); ++k) {
      s.mean_proposal_iou += per[i].proposal_iou[k];
      s.mean_refined_iou += per[i].refined_iou[k];
      ++s.matched_proposals;
    }
  }
  if (s.matched_proposals > 0) {
    s.mean_proposal_iou /= static_cast<double>(s.matched_proposals);
    s.mean_refined_iou /= static_cast<double>(s.matched_proposals);
  }
  s.refined = evaluate_ap(refined, gts, cfg.eval.iou_thr, cfg.eval.recall_positions);
  s.baseline = evaluate_ap(baseline, gts, cfg.eval.iou_thr, cfg.eval.recall_positions);
  return s;
}

std::string eval_csv(const EvalReport& report) {
  return "iou_thr,recall_positions,ap\n" + format_double(report.iou_threshold) + ',' +
         std::to_string(report.recall_positions) + ',' + format_double(report.ap) + '\n';
}

LossGradCheck full_loss_gradcheck(const ModelConfig& model_cfg, std::uint64_t seed,
                                  std::size_t samples, double eps) {
  SceneConfig sc;
  sc.min_objects = 2;
  sc.max_objects = 2;
  sc.x_min = 4.0;
  sc.x_max = 20.0;
  sc.y_min = -8.0;
  sc.y_max = 8.0;
  sc.min_object_points = 40;
  sc.max_object_points = 80;
  const Scene scene = generate_scene(sc, derive_seed(seed, {1}));

  // A coarse and a tight proposal draw, so the mini-batch holds background,
  // ramp and regression records.
  RpnNoiseConfig coarse;
  RpnNoiseConfig tight = coarse;
  tight.sigma_xy *= 0.3;
  tight.sigma_z *= 0.3;
  tight.sigma_size *= 0.3;
  tight.sigma_yaw *= 0.3;
  tight.fp_rate = 0.0;
  ProposalSet props = simulate_rpn(scene, coarse, sc, derive_seed(seed, {2}));
  const ProposalSet extra = simulate_rpn(scene, tight, sc, derive_seed(seed, {3}));
  props.boxes.insert(props.boxes.end(), extra.boxes.begin(), extra.boxes.end());

  TargetConfig targets;
  const TrainBatch batch = match_and_sample(props.boxes, scene.gt_boxes, targets, derive_seed(seed, {4}));

  Model model(model_cfg, derive_seed(seed, {5}));
  const std::uint64_t roi_base = derive_seed(seed, {6});
  const auto roi_seed = [roi_base](std::size_t idx) { return derive_seed(roi_base, {idx}); };

  LossGradCheck out;
  out.records = batch.records.size();
  out.reg_records = batch.reg_count();
  num::GradBuffer analytic = model.params().make_grad_buffer();
  out.loss = scene_loss(model, scene.cloud, batch, roi_seed, &analytic);
  const auto loss = [&] {
    const LossBreakdown l = scene_loss(model, scene.cloud, batch, roi_seed);
    return num::LossProbe{l.total, l.branch_signature};
  };
  out.result = num::grad_check(loss, model.params(), analytic, eps, samples, derive_seed(seed, {7}));
  return out;
}

}  // namespace ct3d

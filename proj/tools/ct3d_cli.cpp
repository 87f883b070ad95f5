#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "ct3d/attention_dump.hpp"
#include "ct3d/config.hpp"
#include "ct3d/detection.hpp"
#include "ct3d/errors.hpp"
#include "ct3d/io.hpp"
#include "ct3d/runtime.hpp"
#include "ct3d/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out = ".";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON run config (defaults when omitted)");
  cmd->add_option("--seed", c.seed, "Run seed");
  cmd->add_option("--out", c.out, "Output directory");
}

ct3d::RunConfig load_config(const Common& c) {
  ct3d::RunConfig cfg = c.config.empty() ? ct3d::RunConfig{} : ct3d::load_run_config(c.config);
  ct3d::validate(cfg);
  return cfg;
}

fs::path prepare_out(const Common& c) {
  fs::path out(c.out);
  fs::create_directories(out);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ct3d::IoError("cannot write " + path.string());
  f << text;
}

std::vector<ct3d::Scene> load_scene_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<ct3d::Scene> scenes;
  for (const auto& f : files) scenes.push_back(ct3d::load_scene(f));
  return scenes;
}

std::string scene_file(const std::string& prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05zu.json", prefix.c_str(), i);
  return buf;
}

ct3d::ProposalSet proposals_for(const ct3d::Scene& scene, const ct3d::RunConfig& cfg,
                                const std::string& proposals_path, std::uint64_t seed) {
  if (!proposals_path.empty()) return ct3d::load_proposals(proposals_path);
  return ct3d::simulate_rpn(scene, cfg.rpn_sim, cfg.data.scene,
                            ct3d::tagged_seed(seed, ct3d::SeedTag::eval_rpn, {0}));
}

}  // namespace

int main(int argc, char** argv) {
  ct3d::tune_allocator();
  CLI::App app{"Channel-wise transformer proposal refinement"};
  app.require_subcommand(1);

  Common synth_c, train_c, eval_c, refine_c, grad_c, attn_c;

  auto* synth = app.add_subcommand("synth", "Generate train and eval scene sets");
  add_common(synth, synth_c);
  bool inline_points = false;
  synth->add_flag("--inline-points", inline_points, "Store points inside the JSON instead of a .bin");

  auto* train = app.add_subcommand("train", "Train the refinement network");
  add_common(train, train_c);
  std::string train_scenes;
  std::size_t log_every = 50;
  train->add_option("--scenes", train_scenes, "Directory of scene JSON files (generated when omitted)");
  train->add_option("--log-every", log_every, "Progress line interval in steps (0 = quiet)");

  auto* eval = app.add_subcommand("eval", "Score a checkpoint against the simulated RPN baseline");
  add_common(eval, eval_c);
  std::string eval_ckpt, eval_scenes;
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval->add_option("--scenes", eval_scenes, "Directory of scene JSON files (generated when omitted)");

  auto* refine = app.add_subcommand("refine", "Refine the proposals of one scene");
  add_common(refine, refine_c);
  std::string refine_ckpt, refine_scene, refine_props;
  refine->add_option("--checkpoint", refine_ckpt, "Checkpoint file")->required();
  refine->add_option("--scene", refine_scene, "Scene JSON")->required();
  refine->add_option("--proposals", refine_props, "Proposal JSON (simulated when omitted)");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the training loss");
  add_common(grad, grad_c);
  std::string grad_scheme;
  std::size_t grad_samples = 200;
  double grad_eps = 1e-4, grad_tol = 1e-4;
  grad->add_option("--scheme", grad_scheme, "Override decode scheme: standard|channel|extended");
  grad->add_option("--samples", grad_samples, "Parameter coordinates to probe");
  grad->add_option("--eps", grad_eps, "Central-difference step");
  grad->add_option("--tol", grad_tol, "Maximum relative error");

  auto* attn = app.add_subcommand("dump-attn", "Write per-point received attention for one proposal");
  add_common(attn, attn_c);
  std::string attn_ckpt, attn_scene, attn_props;
  std::size_t attn_index = 0;
  attn->add_option("--checkpoint", attn_ckpt, "Checkpoint file")->required();
  attn->add_option("--scene", attn_scene, "Scene JSON")->required();
  attn->add_option("--proposals", attn_props, "Proposal JSON (simulated when omitted)");
  attn->add_option("--proposal-index", attn_index, "Proposal to inspect")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const ct3d::RunConfig cfg = load_config(synth_c);
      const fs::path out = prepare_out(synth_c);
      for (const auto& [split, tag, count] :
           {std::tuple{std::string("train"), ct3d::SeedTag::train_scene, cfg.data.train_scenes},
            std::tuple{std::string("eval"), ct3d::SeedTag::eval_scene, cfg.data.eval_scenes}}) {
        fs::create_directories(out / split);
        const auto scenes = ct3d::make_scenes(cfg.data.scene, synth_c.seed, tag, count);
        for (std::size_t i = 0; i < scenes.size(); ++i)
          ct3d::save_scene(out / split / scene_file(split, i), scenes[i], inline_points);
        std::cout << "wrote " << scenes.size() << ' ' << split << " scenes to " << (out / split) << '\n';
      }
    } else if (*train) {
      const ct3d::RunConfig cfg = load_config(train_c);
      const fs::path out = prepare_out(train_c);
      const auto scenes = train_scenes.empty()
                              ? ct3d::make_scenes(cfg.data.scene, train_c.seed, ct3d::SeedTag::train_scene,
                                                  cfg.data.train_scenes)
                              : load_scene_dir(train_scenes);
      const auto start = std::chrono::steady_clock::now();
      const auto progress = [&](const ct3d::MetricsRow& r, std::size_t total) {
        if (log_every == 0 || (r.step % log_every != 0 && r.step + 1 != total)) return;
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::fprintf(stderr, "step %zu/%zu lr %.3g loss %.4f (conf %.4f reg %.4f) %.0fs\n", r.step + 1,
                     total, r.lr, r.loss_total, r.loss_conf, r.loss_reg, secs);
      };
      const ct3d::TrainResult result = ct3d::train(cfg, train_c.seed, scenes, progress);
      result.model.save(out / "checkpoint.ckpt");
      ct3d::write_metrics_csv(out / "metrics.csv", result.metrics);
      write_text(out / "config.json", ct3d::run_config_to_json(cfg) + "\n");
      std::cout << "wrote " << (out / "checkpoint.ckpt") << " and " << (out / "metrics.csv") << '\n';
    } else if (*eval) {
      const ct3d::RunConfig cfg = load_config(eval_c);
      const fs::path out = prepare_out(eval_c);
      const ct3d::Model model = ct3d::Model::load(eval_ckpt);
      const auto scenes = eval_scenes.empty()
                              ? ct3d::make_scenes(cfg.data.scene, eval_c.seed, ct3d::SeedTag::eval_scene,
                                                  cfg.data.eval_scenes)
                              : load_scene_dir(eval_scenes);
      const ct3d::EvalSummary s = ct3d::evaluate_model(model, scenes, cfg, eval_c.seed);
      write_text(out / "eval.csv", ct3d::eval_csv(s.refined));
      write_text(out / "eval_baseline.csv", ct3d::eval_csv(s.baseline));
      const json summary = {{"refined_ap", s.refined.ap},
                            {"baseline_ap", s.baseline.ap},
                            {"mean_proposal_iou", s.mean_proposal_iou},
                            {"mean_refined_iou", s.mean_refined_iou},
                            {"matched_proposals", s.matched_proposals},
                            {"num_gt", s.refined.num_gt}};
      write_text(out / "eval_summary.json", summary.dump(2) + "\n");
      std::cout << summary.dump(2) << '\n';
    } else if (*refine) {
      const ct3d::RunConfig cfg = load_config(refine_c);
      const fs::path out = prepare_out(refine_c);
      const ct3d::Model model = ct3d::Model::load(refine_ckpt);
      const ct3d::Scene scene = ct3d::load_scene(refine_scene);
      const ct3d::ProposalSet props = proposals_for(scene, cfg, refine_props, refine_c.seed);
      ct3d::RefineConfig rc;
      rc.top_k = cfg.eval.top_k;
      rc.nms = cfg.eval.nms;
      rc.nms_iou = cfg.eval.nms_iou;
      rc.seed = refine_c.seed;
      const auto dets = ct3d::refine(scene.cloud, props, model, rc);
      ct3d::save_detections(out / "detections.json", dets);
      std::cout << "wrote " << dets.size() << " detections to " << (out / "detections.json") << '\n';
    } else if (*grad) {
      ct3d::RunConfig cfg = load_config(grad_c);
      if (!grad_scheme.empty()) cfg.model.decoder.scheme = ct3d::parse_decode_scheme(grad_scheme);
      const fs::path out = prepare_out(grad_c);
      const ct3d::LossGradCheck g = ct3d::full_loss_gradcheck(cfg.model, grad_c.seed, grad_samples, grad_eps);
      const json report = {{"scheme", ct3d::to_string(cfg.model.decoder.scheme)},
                           {"max_rel_error", g.result.max_rel_error},
                           {"coords_checked", g.result.coords_checked},
                           {"kinks_skipped", g.result.kinks_skipped},
                           {"records", g.records},
                           {"reg_records", g.reg_records},
                           {"loss", g.loss.total},
                           {"tolerance", grad_tol},
                           {"pass", g.result.max_rel_error < grad_tol}};
      write_text(out / "gradcheck.json", report.dump(2) + "\n");
      std::cout << report.dump(2) << '\n';
      return g.result.max_rel_error < grad_tol ? 0 : 1;
    } else if (*attn) {
      const ct3d::RunConfig cfg = load_config(attn_c);
      const fs::path out = prepare_out(attn_c);
      const ct3d::Model model = ct3d::Model::load(attn_ckpt);
      const ct3d::Scene scene = ct3d::load_scene(attn_scene);
      const ct3d::ProposalSet props = proposals_for(scene, cfg, attn_props, attn_c.seed);
      ct3d::dump_attention(model, scene.cloud, props, attn_index, attn_c.seed, out / "attention.csv");
      std::cout << "wrote " << (out / "attention.csv") << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

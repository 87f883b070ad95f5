#include "ct3d/config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ct3d/errors.hpp"

namespace ct3d {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& section, const char* key, T& field) {
  if (section.contains(key)) field = section.at(key).get<T>();
}

const json& section(const json& root, const char* name) {
  static const json empty = json::object();
  if (!root.contains(name)) return empty;
  const json& s = root.at(name);
  if (!s.is_object()) throw ConfigError(std::string("config: section '") + name + "' must be an object");
  return s;
}

}  // namespace

void validate(const RunConfig& cfg) {
  validate(cfg.model);
  if (cfg.model.encoder.layers < 1) throw ConfigError("model: layers must be >= 1");
  if (cfg.model.encoder.raw_feature_dim != 1)
    throw ConfigError("model: raw_feature_dim must be 1 for reflectance input");
  validate(cfg.targets);
  if (!(cfg.optim.max_lr > 0.0)) throw ConfigError("optim: max_lr must be > 0");
  if (cfg.optim.batch < 1) throw ConfigError("optim: batch must be >= 1");
  validate(cfg.rpn_sim);
  validate(cfg.data.scene);
  if (cfg.eval.recall_positions != 11 && cfg.eval.recall_positions != 40)
    throw ConfigError("eval: recall_positions must be 11 or 40");
  if (!(cfg.eval.iou_thr > 0.0 && cfg.eval.iou_thr <= 1.0)) throw ConfigError("eval: iou_thr must be in (0,1]");
  if (cfg.eval.top_k < 1) throw ConfigError("eval: top_k must be >= 1");
  if (cfg.threads < 1) throw ConfigError("runtime: threads must be >= 1");
}

RunConfig run_config_from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  try {
    const json& m = section(root, "model");
    cfg.model = model_config_from_json(m.dump());

    const json& t = section(root, "targets");
    read(t, "alpha_f", cfg.targets.alpha_f);
    read(t, "alpha_b", cfg.targets.alpha_b);
    read(t, "alpha_r", cfg.targets.alpha_r);
    read(t, "n_conf_samples", cfg.targets.n_conf_samples);
    read(t, "n_reg_samples", cfg.targets.n_reg_samples);

    const json& o = section(root, "optim");
    read(o, "max_lr", cfg.optim.max_lr);
    read(o, "epochs", cfg.optim.epochs);
    read(o, "batch", cfg.optim.batch);
    read(o, "warmup_steps", cfg.optim.warmup_steps);

    const json& r = section(root, "rpn_sim");
    read(r, "sigma_xy", cfg.rpn_sim.sigma_xy);
    read(r, "sigma_z", cfg.rpn_sim.sigma_z);
    read(r, "sigma_size", cfg.rpn_sim.sigma_size);
    read(r, "sigma_yaw", cfg.rpn_sim.sigma_yaw);
    read(r, "p_miss", cfg.rpn_sim.p_miss);
    read(r, "fp_rate", cfg.rpn_sim.fp_rate);
    read(r, "score_noise", cfg.rpn_sim.score_noise);

    const json& e = section(root, "eval");
    read(e, "iou_thr", cfg.eval.iou_thr);
    read(e, "recall_positions", cfg.eval.recall_positions);
    read(e, "top_k", cfg.eval.top_k);
    read(e, "nms", cfg.eval.nms);
    read(e, "nms_iou", cfg.eval.nms_iou);

    const json& d = section(root, "data");
    read(d, "train_scenes", cfg.data.train_scenes);
    read(d, "eval_scenes", cfg.data.eval_scenes);
    SceneConfig& s = cfg.data.scene;
    read(d, "min_objects", s.min_objects);
    read(d, "max_objects", s.max_objects);
    read(d, "x_min", s.x_min);
    read(d, "x_max", s.x_max);
    read(d, "y_min", s.y_min);
    read(d, "y_max", s.y_max);
    read(d, "ground_z", s.ground_z);
    read(d, "min_object_points", s.min_object_points);
    read(d, "max_object_points", s.max_object_points);
    read(d, "ground_density", s.ground_density);
    read(d, "point_noise", s.point_noise);

    read(section(root, "runtime"), "threads", cfg.threads);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return run_config_from_json(ss.str());
}

std::string run_config_to_json(const RunConfig& cfg) {
  json root;
  root["model"] = json::parse(model_config_to_json(cfg.model));
  root["targets"] = {{"alpha_f", cfg.targets.alpha_f},
                     {"alpha_b", cfg.targets.alpha_b},
                     {"alpha_r", cfg.targets.alpha_r},
                     {"n_conf_samples", cfg.targets.n_conf_samples},
                     {"n_reg_samples", cfg.targets.n_reg_samples}};
  root["optim"] = {{"max_lr", cfg.optim.max_lr},
                   {"epochs", cfg.optim.epochs},
                   {"batch", cfg.optim.batch},
                   {"warmup_steps", cfg.optim.warmup_steps}};
  root["rpn_sim"] = {{"sigma_xy", cfg.rpn_sim.sigma_xy},   {"sigma_z", cfg.rpn_sim.sigma_z},
                     {"sigma_size", cfg.rpn_sim.sigma_size}, {"sigma_yaw", cfg.rpn_sim.sigma_yaw},
                     {"p_miss", cfg.rpn_sim.p_miss},       {"fp_rate", cfg.rpn_sim.fp_rate},
                     {"score_noise", cfg.rpn_sim.score_noise}};
  root["eval"] = {{"iou_thr", cfg.eval.iou_thr}, {"recall_positions", cfg.eval.recall_positions},
                  {"top_k", cfg.eval.top_k},     {"nms", cfg.eval.nms},
                  {"nms_iou", cfg.eval.nms_iou}};
  const SceneConfig& s = cfg.data.scene;
  root["data"] = {{"train_scenes", cfg.data.train_scenes},
                  {"eval_scenes", cfg.data.eval_scenes},
                  {"min_objects", s.min_objects},
                  {"max_objects", s.max_objects},
                  {"x_min", s.x_min},
                  {"x_max", s.x_max},
                  {"y_min", s.y_min},
                  {"y_max", s.y_max},
                  {"ground_z", s.ground_z},
                  {"min_object_points", s.min_object_points},
                  {"max_object_points", s.max_object_points},
                  {"ground_density", s.ground_density},
                  {"point_noise", s.point_noise}};
  root["runtime"] = {{"threads", cfg.threads}};
  return root.dump(2);
}

}  // namespace ct3d

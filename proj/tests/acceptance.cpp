// Acceptance run: one PASS/FAIL line per criterion, details indented below.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "ct3d/checkpoint.hpp"
#include "ct3d/decoder.hpp"
#include "ct3d/detection.hpp"
#include "ct3d/encoder.hpp"
#include "ct3d/geometry.hpp"
#include "ct3d/model.hpp"
#include "ct3d/runtime.hpp"
#include "ct3d/trainer.hpp"
#include "ct3d/training.hpp"
#include "model_oracle.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace ct3d;
using num::Tape;
using num::Tensor2;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Verdict {
  bool pass = true;
  std::vector<std::string> details;

  void note(std::string s) { details.push_back(std::move(s)); }
  void require(bool ok, std::string what) {
    if (!ok) {
      pass = false;
      details.push_back("violated: " + std::move(what));
    }
  }
};

constexpr DecodeScheme kSchemes[] = {DecodeScheme::standard, DecodeScheme::channel, DecodeScheme::extended};

// 1. Full-loss gradient check at D=64, N=64.
Verdict gradient_correctness() {
  Verdict v;
  const auto start = Clock::now();
  for (DecodeScheme scheme : kSchemes) {
    ModelConfig cfg;
    cfg.encoder.n_points = 64;
    cfg.decoder.scheme = scheme;
    const LossGradCheck g = full_loss_gradcheck(cfg, 1, 200, 1e-4);
    v.note(fmt("%-8s max rel err %.3e over %zu coords (%zu kink-straddling probes redrawn), %zu records, %zu in reg set",
               std::string(to_string(scheme)).c_str(), g.result.max_rel_error, g.result.coords_checked,
               g.result.kinks_skipped, g.records, g.reg_records));
    v.require(g.result.max_rel_error < 1e-4, std::string(to_string(scheme)) + " error >= 1e-4");
    v.require(g.reg_records > 0, "regression loss inactive in the check");
  }
  const double secs = seconds_since(start);
  v.note(fmt("runtime %.1fs (limit 120s)", secs));
  v.require(secs < 120.0, "runtime over 2 minutes");
  return v;
}

// 2. Library against scalar-loop oracles on small instances.
Verdict oracle_equivalence() {
  Verdict v;
  std::mt19937_64 rng(2);
  double enc_err = 0.0, weight_err = 0.0, head_err = 0.0;
  std::size_t instances = 0;
  for (DecodeScheme scheme : kSchemes) {
    for (int trial = 0; trial < 40; ++trial, ++instances) {
      const ModelConfig cfg = oracle::small_config(rng, scheme);
      Model model(cfg, trial);
      oracle::randomize_params(model.params(), rng);
      const RoiSample s = oracle::random_sample(cfg.encoder.n_points, rng);
      const auto ref = oracle::model_forward(model, s);

      Tape tape(Tape::Mode::inference);
      const Tensor2& enc = tape.value(encode(tape, model.params(), model.encoder_params(), s, cfg.encoder));
      for (std::size_t i = 0; i < enc.rows(); ++i)
        for (std::size_t j = 0; j < enc.cols(); ++j) enc_err = std::max(enc_err, std::abs(enc(i, j) - ref.encoded[i][j]));

      const std::size_t hd = cfg.encoder.head_dim();
      const Tensor2 keys = testing::random_tensor(cfg.encoder.n_points, hd, rng, 2.0);
      const Tensor2 q = testing::random_tensor(1, hd, rng), sc = testing::random_tensor(1, hd, rng);
      const auto km = oracle::to_mat(keys);
      const auto qv = oracle::row_of(q), sv = oracle::row_of(sc);
      std::vector<double> got, want;
      switch (scheme) {
        case DecodeScheme::standard:
          got = decode_weights_standard(keys, qv), want = oracle::weights_standard(km, qv);
          break;
        case DecodeScheme::channel:
          got = decode_weights_channel(keys, sv), want = oracle::weights_channel(km, sv);
          break;
        case DecodeScheme::extended:
          got = decode_weights_extended(keys, qv, sv), want = oracle::weights_extended(km, qv, sv);
          break;
      }
      for (std::size_t j = 0; j < got.size(); ++j) weight_err = std::max(weight_err, std::abs(got[j] - want[j]));

      const Prediction p = model.predict(s);
      head_err = std::max(head_err, std::abs(p.logit - ref.logit));
      const auto r = p.residuals.to_array();
      for (int k = 0; k < 7; ++k) head_err = std::max(head_err, std::abs(r[k] - ref.residuals[k]));
    }
  }
  v.note(fmt("%zu instances (N<=8, D<=8, 40 per scheme)", instances));
  v.note(fmt("encoder stack max abs err %.3e", enc_err));
  v.note(fmt("decode weights max abs err %.3e", weight_err));
  v.note(fmt("decode + detect head max abs err %.3e", head_err));
  v.require(instances >= 100, "fewer than 100 instances");
  v.require(enc_err <= 1e-10 && weight_err <= 1e-10 && head_err <= 1e-10, "error above 1e-10");
  return v;
}

RoiSample permute_rows(const RoiSample& s, const std::vector<std::size_t>& perm) {
  RoiSample out = s;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    auto src = s.rel_features.row(perm[i]);
    std::copy(src.begin(), src.end(), out.rel_features.row(i).begin());
    out.source_indices[i] = s.source_indices[perm[i]];
  }
  return out;
}

double dyadic(double v) { return std::round(v * 64.0) / 64.0; }

// 3. Exact permutation and joint-translation behaviour at the default size.
Verdict invariants() {
  Verdict v;
  std::mt19937_64 rng(3);
  const ModelConfig cfg;
  const std::size_t n = cfg.encoder.n_points;
  std::vector<std::size_t> perm(n);

  int enc_ok = 0, dec_ok = 0, trans_ok = 0;
  for (int c = 0; c < 50; ++c) {
    Model model(cfg, 100 + c);
    oracle::randomize_params(model.params(), rng, 0.2);
    const RoiSample s = oracle::random_sample(n, rng);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);

    Tape ta(Tape::Mode::inference), tb(Tape::Mode::inference);
    const Tensor2& a = ta.value(encode(ta, model.params(), model.encoder_params(), s, cfg.encoder));
    const Tensor2& b = tb.value(encode(tb, model.params(), model.encoder_params(), permute_rows(s, perm), cfg.encoder));
    bool same = true;
    for (std::size_t i = 0; i < n; ++i) {
      auto ra = a.row(perm[i]), rb = b.row(i);
      same = same && std::equal(ra.begin(), ra.end(), rb.begin(), rb.end());
    }
    enc_ok += same;

    // Decoder alone on a random encoding and its row permutation.
    const Tensor2 x = testing::random_tensor(n, cfg.encoder.dim, rng);
    Tensor2 xp(n, cfg.encoder.dim);
    for (std::size_t i = 0; i < n; ++i) std::copy(x.row(perm[i]).begin(), x.row(perm[i]).end(), xp.row(i).begin());
    Tape da(Tape::Mode::inference), db(Tape::Mode::inference);
    const Tensor2& ya = da.value(decode(da, model.params(), model.decoder_params(), da.constant(x), cfg.encoder, cfg.decoder));
    const Tensor2& yb = db.value(decode(db, model.params(), model.decoder_params(), db.constant(xp), cfg.encoder, cfg.decoder));
    const Prediction pa = model.predict(s), pb = model.predict(permute_rows(s, perm));
    dec_ok += ya == yb && pa.logit == pb.logit && pa.residuals.to_array() == pb.residuals.to_array();
  }

  // Coordinates on a 1/64 m grid make every point-minus-proposal difference
  // exact, so the network sees identical inputs after a joint translation.
  const Model model(cfg, 7);
  double box_err = 0.0;
  std::size_t proposals = 0;
  for (int c = 0; c < 50; ++c) {
    Scene s = generate_scene(SceneConfig{}, 300 + c);
    for (Vec3& p : s.cloud.points) p = {dyadic(p.x), dyadic(p.y), dyadic(p.z)};
    ProposalSet props = simulate_rpn(s, RpnNoiseConfig{}, SceneConfig{}, 300 + c);
    for (Box3D& b : props.boxes) b.x = dyadic(b.x), b.y = dyadic(b.y), b.z = dyadic(b.z);
    const Vec3 t{dyadic(testing::uniform(rng, -60, 60)), dyadic(testing::uniform(rng, -60, 60)),
                 dyadic(testing::uniform(rng, -3, 3))};
    Scene moved = s;
    for (Vec3& p : moved.cloud.points) p = p + t;
    ProposalSet pm = props;
    for (Box3D& b : pm.boxes) b.x += t.x, b.y += t.y, b.z += t.z;
    RefineConfig rc;
    rc.nms = false;
    rc.seed = c;
    const auto ra = refine_proposals(s.cloud, props, model, rc);
    const auto rb = refine_proposals(moved.cloud, pm, model, rc);
    bool same = ra.size() == rb.size();
    for (std::size_t i = 0; same && i < ra.size(); ++i) {
      same = ra[i].logit == rb[i].logit && ra[i].refined.l == rb[i].refined.l && ra[i].refined.w == rb[i].refined.w &&
             ra[i].refined.h == rb[i].refined.h && ra[i].refined.yaw == rb[i].refined.yaw;
      box_err = std::max({box_err, std::abs(rb[i].refined.x - t.x - ra[i].refined.x),
                          std::abs(rb[i].refined.y - t.y - ra[i].refined.y),
                          std::abs(rb[i].refined.z - t.z - ra[i].refined.z)});
    }
    proposals += ra.size();
    trans_ok += same;
  }
  v.note(fmt("encode permutation equivariance: %d/50 bit-identical (D=%zu, N=%zu)", enc_ok, cfg.encoder.dim, n));
  v.note(fmt("decode permutation invariance: %d/50 bit-identical", dec_ok));
  v.note(fmt("joint translation: %d/50 scenes with bit-identical network outputs (%zu proposals); "
             "refined centers shift by t within %.1e",
             trans_ok, proposals, box_err));
  v.require(enc_ok == 50 && dec_ok == 50 && trans_ok == 50, "a case was not bit-identical");
  v.require(box_err <= 1e-12, "refined center shift off by more than 1e-12");
  return v;
}

// 4. Codec round trip and confidence-target anchors.
Verdict codec_laws() {
  Verdict v;
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Box3D p = testing::random_box(rng, 40.0), g = testing::random_box(rng, 40.0);
    const auto back = decode_box(p, encode_targets(p, g)).to_array(), want = g.to_array();
    for (int k = 0; k < 7; ++k) worst = std::max(worst, std::abs(back[k] - want[k]));
  }
  const TargetConfig t;
  const double c0 = confidence_target(0.25, t), c1 = confidence_target(0.75, t), ch = confidence_target(0.5, t);
  v.note(fmt("round trip: max abs err %.3e over 1000 pairs", worst));
  v.note(fmt("anchors: c(0.25)=%g c(0.75)=%g c(0.5)=%g", c0, c1, ch));
  v.require(worst <= 1e-9, "round trip error above 1e-9");
  v.require(c0 == 0.0 && c1 == 1.0 && ch == 0.5, "anchor mismatch");
  return v;
}

// 5. IoU against Monte Carlo, symmetry and rigid invariance.
Verdict iou_correctness() {
  Verdict v;
  std::mt19937_64 rng(5), mc(55);
  double mc_err = 0.0, sym_err = 0.0, rigid_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Box3D a = testing::random_box(rng);
    const Box3D b = i % 5 == 0 ? testing::random_box(rng) : testing::nearby_box(a, rng);
    const double bev = iou_bev(a, b), vol = iou_3d(a, b);
    mc_err = std::max({mc_err, std::abs(bev - oracle::monte_carlo_iou(a, b, true, 500000, mc)),
                       std::abs(vol - oracle::monte_carlo_iou(a, b, false, 500000, mc))});
    sym_err = std::max({sym_err, std::abs(bev - iou_bev(b, a)), std::abs(vol - iou_3d(b, a))});
    const double phi = testing::uniform(rng, -3.2, 3.2);
    const Vec3 t{testing::uniform(rng, -50, 50), testing::uniform(rng, -50, 50), testing::uniform(rng, -5, 5)};
    const auto move = [&](Box3D x) {
      const double px = std::cos(phi) * x.x - std::sin(phi) * x.y, py = std::sin(phi) * x.x + std::cos(phi) * x.y;
      x.x = px + t.x, x.y = py + t.y, x.z += t.z, x.yaw += phi;
      return x;
    };
    rigid_err = std::max({rigid_err, std::abs(bev - iou_bev(move(a), move(b))), std::abs(vol - iou_3d(move(a), move(b)))});
  }
  v.note(fmt("Monte-Carlo (5e5 samples per estimate): max abs diff %.3e over 1000 pairs, BEV and 3D", mc_err));
  v.note(fmt("symmetry max diff %.3e; rigid transform max diff %.3e", sym_err, rigid_err));
  v.require(mc_err <= 1e-2, "Monte-Carlo difference above 1e-2");
  v.require(sym_err <= 1e-9 && rigid_err <= 1e-9, "symmetry or rigid invariance above 1e-9");
  return v;
}

// Trained runs shared by criteria 6, 7 and 9.
struct Run {
  std::vector<std::uint8_t> checkpoint;
  std::string metrics;
  EvalSummary eval;
  double train_seconds = 0.0;
};

class RunCache {
 public:
  explicit RunCache(fs::path out) : out_(std::move(out)) {}

  const Run& get(const std::string& variant, const RunConfig& cfg, std::uint64_t seed) {
    const auto key = std::make_pair(variant, seed);
    if (auto it = runs_.find(key); it != runs_.end()) return it->second;
    runs_[key] = execute(variant, cfg, seed);
    return runs_[key];
  }

  Run execute(const std::string& variant, const RunConfig& cfg, std::uint64_t seed) const {
    const auto train_scenes = make_scenes(cfg.data.scene, seed, SeedTag::train_scene, cfg.data.train_scenes);
    const auto eval_scenes = make_scenes(cfg.data.scene, seed, SeedTag::eval_scene, cfg.data.eval_scenes);
    const auto start = Clock::now();
    const TrainResult r = train(cfg, seed, train_scenes);
    Run run;
    run.train_seconds = seconds_since(start);
    run.checkpoint = r.model.checkpoint_bytes();
    run.metrics = metrics_csv(r.metrics);
    run.eval = evaluate_model(r.model, eval_scenes, cfg, seed);
    if (!out_.empty()) {
      const fs::path dir = out_ / (variant + "_seed" + std::to_string(seed));
      fs::create_directories(dir);
      std::ofstream(dir / "metrics.csv", std::ios::binary) << run.metrics;
      std::ofstream(dir / "eval.csv") << eval_csv(run.eval.refined);
      std::ofstream(dir / "eval_baseline.csv") << eval_csv(run.eval.baseline);
    }
    std::fprintf(stderr, "  trained %s seed %llu in %.0fs: proposal IoU %.4f -> refined %.4f, AP %.4f -> %.4f\n",
                 variant.c_str(), static_cast<unsigned long long>(seed), run.train_seconds, run.eval.mean_proposal_iou,
                 run.eval.mean_refined_iou, run.eval.baseline.ap, run.eval.refined.ap);
    return run;
  }

 private:
  fs::path out_;
  std::map<std::pair<std::string, std::uint64_t>, Run> runs_;
};

RunConfig variant_config(const std::string& name) {
  RunConfig cfg;
  if (name == "standard") cfg.model.decoder.scheme = DecodeScheme::standard;
  if (name == "size_orientation") cfg.model.encoder.embedding = EmbeddingKind::size_orientation;
  return cfg;
}

// 6. Refinement efficacy on the default configuration.
Verdict refinement_efficacy(RunCache& cache) {
  Verdict v;
  const RunConfig cfg = variant_config("extended");
  v.note(fmt("config: %zu train / %zu eval scenes, D=%zu, N=%zu, %zu epochs, scheme %s", cfg.data.train_scenes,
             cfg.data.eval_scenes, cfg.model.encoder.dim, cfg.model.encoder.n_points, cfg.optim.epochs,
             std::string(to_string(cfg.model.decoder.scheme)).c_str()));
  int ok = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const Run& r = cache.get("extended", cfg, seed);
    const double gain = r.eval.mean_refined_iou - r.eval.mean_proposal_iou;
    const bool pass = gain >= 0.08 && r.eval.refined.ap > r.eval.baseline.ap;
    ok += pass;
    v.note(fmt("seed %llu: mean IoU %.4f -> %.4f (gain %+.4f over %zu proposals), R40 AP@0.7 baseline %.2f -> refined "
               "%.2f, train %.0fs%s",
               static_cast<unsigned long long>(seed), r.eval.mean_proposal_iou, r.eval.mean_refined_iou, gain,
               r.eval.matched_proposals, 100 * r.eval.baseline.ap, 100 * r.eval.refined.ap, r.train_seconds,
               pass ? "" : "  <- fails"));
  }
  v.require(ok == 3, fmt("only %d of 3 seeds meet both conditions", ok));
  return v;
}

// 7. Decoder and embedding ablations over 5 seeds.
Verdict ablation_trend(RunCache& cache) {
  Verdict v;
  std::map<std::string, double> mean_ap;
  for (const std::string name : {"extended", "standard", "size_orientation"}) {
    std::string aps;
    double sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const double ap = 100 * cache.get(name, variant_config(name), seed).eval.refined.ap;
      sum += ap;
      aps += fmt(" %.2f", ap);
    }
    mean_ap[name] = sum / 5;
    v.note(fmt("%-16s mean R40 AP@0.7 %.2f  (seeds:%s)", name.c_str(), mean_ap[name], aps.c_str()));
  }
  v.note("extended and keypoints are the same default model");
  v.require(mean_ap["extended"] >= mean_ap["standard"] - 0.5, "extended below standard - 0.5 AP");
  v.require(mean_ap["extended"] > mean_ap["size_orientation"], "keypoints embedding not above size_orientation");
  return v;
}

// 8. Parameter accounting.
Verdict parameter_accounting() {
  Verdict v;
  for (auto [d, h] : {std::pair<std::size_t, std::size_t>{64, 4}, {64, 8}, {32, 2}, {128, 4}}) {
    ModelConfig a, b;
    a.encoder.dim = b.encoder.dim = d;
    a.encoder.heads = b.encoder.heads = h;
    a.decoder.scheme = DecodeScheme::extended;
    b.decoder.scheme = DecodeScheme::standard;
    const std::size_t na = Model(a, 0).params().scalar_count(), nb = Model(b, 0).params().scalar_count();
    const std::size_t hd = d / h;
    v.note(fmt("D=%zu H=%zu: extended %zu - standard %zu = %zu reals (H*D' = %zu, %zu bytes as float64)", d, h, na, nb,
               na - nb, h * hd, 8 * (na - nb)));
    v.require(na - nb == h * hd, "delta differs from H*D'");
  }
  return v;
}

// 9. Determinism of train in single-threaded mode.
Verdict determinism(RunCache& cache) {
  Verdict v;
  const RunConfig cfg = variant_config("extended");
  const Run& first = cache.get("extended", cfg, 1);
  const Run second = cache.execute("extended_repeat", cfg, 1);
  const bool ckpt = first.checkpoint == second.checkpoint, csv = first.metrics == second.metrics;
  v.note(fmt("default config, seed 1, threads=%zu: checkpoint %zu bytes %s, metrics CSV %zu bytes %s", cfg.threads,
             first.checkpoint.size(), ckpt ? "identical" : "DIFFERENT", first.metrics.size(),
             csv ? "identical" : "DIFFERENT"));
  v.require(ckpt && csv, "outputs differ between identical runs");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Acceptance checks for the refinement network"};
  std::vector<int> only;
  std::string out;
  app.add_option("--criteria", only, "Run only these criteria (1-9)")->delimiter(',');
  app.add_option("--out", out, "Directory for per-run metrics and the report");
  CLI11_PARSE(app, argc, argv);

  RunCache cache(out.empty() ? fs::path() : fs::path(out) / "runs");
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"oracle equivalence", oracle_equivalence},
      {"architectural invariants", invariants},
      {"codec and target laws", codec_laws},
      {"IoU correctness", iou_correctness},
      {"refinement efficacy", [&] { return refinement_efficacy(cache); }},
      {"ablation trend", [&] { return ablation_trend(cache); }},
      {"parameter accounting", parameter_accounting},
      {"determinism", [&] { return determinism(cache); }},
  };

  std::ostringstream report;
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto start = Clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.note(std::string("exception: ") + e.what());
    }
    std::ostringstream block;
    block << (v.pass ? "PASS" : "FAIL") << ' ' << id << ' ' << criteria[i].first
          << fmt(" (%.1fs)", seconds_since(start)) << '\n';
    for (const auto& d : v.details) block << "    " << d << '\n';
    std::fputs(block.str().c_str(), stdout);
    std::fflush(stdout);
    report << block.str();
    failed += !v.pass;
  }
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream(fs::path(out) / "acceptance_report.txt") << report.str();
  }
  return failed == 0 ? 0 : 1;
}

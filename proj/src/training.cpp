#include "ct3d/training.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

#include "ct3d/errors.hpp"
#include "ct3d/tensor.hpp"

namespace ct3d {

void validate(const TargetConfig& cfg) {
  if (!(0.0 <= cfg.alpha_b && cfg.alpha_b < cfg.alpha_f && cfg.alpha_f <= 1.0))
    throw ConfigError("targets: need 0 <= alpha_b < alpha_f <= 1");
  if (!(0.0 < cfg.alpha_r && cfg.alpha_r < 1.0)) throw ConfigError("targets: need 0 < alpha_r < 1");
  if (cfg.n_conf_samples == 0) throw ConfigError("targets: n_conf_samples must be >= 1");
}

double confidence_target(double iou, const TargetConfig& cfg) {
  return std::min(1.0, std::max(0.0, (iou - cfg.alpha_b) / (cfg.alpha_f - cfg.alpha_b)));
}

std::size_t TrainBatch::reg_count() const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const TrainRecord& r) { return r.in_reg_set; }));
}

namespace {

// Uniform subset of size k from [0, n), returned ascending.
std::vector<std::size_t> sample_subset(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (k < n) {
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

}  // namespace

TrainBatch match_and_sample(std::span<const Box3D> proposals, std::span<const Box3D> gts,
                            const TargetConfig& cfg, std::uint64_t seed) {
  if (proposals.empty()) throw std::invalid_argument("match_and_sample: no proposals");
  std::mt19937_64 rng(seed);

  const auto conf_idx = sample_subset(proposals.size(), cfg.n_conf_samples, rng);
  TrainBatch batch;
  batch.records.reserve(conf_idx.size());
  for (std::size_t pi : conf_idx) {
    TrainRecord rec;
    rec.proposal_index = pi;
    rec.proposal = proposals[pi];
    double best = 0.0;
    std::optional<std::size_t> best_gt;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const double iou = iou_3d(proposals[pi], gts[g]);
      if (iou > best) {
        best = iou;
        best_gt = g;
      }
    }
    rec.iou = best;
    rec.conf_target = confidence_target(best, cfg);
    if (best_gt) {
      rec.matched_gt = gts[*best_gt];
      ResidualTargets t = encode_targets(rec.proposal, *rec.matched_gt);
      t.theta = wrap_angle(t.theta);
      rec.residual_targets = t;
    }
    batch.records.push_back(std::move(rec));
  }

  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < batch.records.size(); ++i)
    if (batch.records[i].matched_gt && batch.records[i].iou >= cfg.alpha_r) eligible.push_back(i);
  for (std::size_t k : sample_subset(eligible.size(), cfg.n_reg_samples, rng))
    batch.records[eligible[k]].in_reg_set = true;
  return batch;
}

double confidence_loss(double logit, double c_t) { return num::bce_with_logits(logit, c_t); }

double regression_loss(const TrainBatch& batch, std::span<const ResidualTargets> predicted) {
  if (predicted.size() != batch.records.size())
    throw std::invalid_argument("regression_loss: predictions not aligned with batch");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < batch.records.size(); ++i) {
    const TrainRecord& r = batch.records[i];
    if (!r.in_reg_set) continue;
    const auto pred = predicted[i].to_array();
    const auto tgt = r.residual_targets->to_array();
    for (std::size_t k = 0; k < 7; ++k) total += num::smooth_l1(pred[k], tgt[k]);
    ++count;
  }
  return total / static_cast<double>(std::max<std::size_t>(1, count));
}

double total_loss(double conf_loss, double reg_loss) {
  constexpr double rpn_loss = 0.0;
  return rpn_loss + conf_loss + reg_loss;
}

}  // namespace ct3d

#include "ct3d/evaluation.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>
#include <tuple>

namespace ct3d {

EvalReport evaluate_ap(std::span<const std::vector<Detection>> detections,
                       std::span<const std::vector<Box3D>> gts, double iou_thr, int recall_positions) {
  if (recall_positions != 11 && recall_positions != 40)
    throw std::invalid_argument("evaluate_ap: recall_positions must be 11 or 40");
  if (detections.size() != gts.size())
    throw std::invalid_argument("evaluate_ap: detections and ground truths cover different scenes");

  EvalReport report;
  report.recall_positions = recall_positions;
  report.iou_threshold = iou_thr;

  struct Ranked {
    double confidence;
    std::array<double, 7> box;
    std::size_t scene;
  };
  std::vector<Ranked> ranked;
  for (std::size_t s = 0; s < detections.size(); ++s) {
    report.num_gt += gts[s].size();
    for (const Detection& d : detections[s]) ranked.push_back({d.confidence, d.box.to_array(), s});
  }
  report.num_detections = ranked.size();
  // Total order that does not depend on input order.
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    return std::tie(b.confidence, a.scene, a.box) < std::tie(a.confidence, b.scene, b.box);
  });

  std::vector<std::vector<bool>> taken(gts.size());
  for (std::size_t s = 0; s < gts.size(); ++s) taken[s].assign(gts[s].size(), false);

  std::vector<double> recalls;
  std::vector<double> precisions;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const Ranked& r = ranked[i];
    const Box3D box = Box3D::from_array(r.box);
    double best = -1.0;
    std::size_t best_gt = 0;
    for (std::size_t g = 0; g < gts[r.scene].size(); ++g) {
      if (taken[r.scene][g]) continue;
      const double iou = iou_3d(box, gts[r.scene][g]);
      if (iou > best) {
        best = iou;
        best_gt = g;
      }
    }
    if (best >= iou_thr) {
      taken[r.scene][best_gt] = true;
      ++tp;
    }
    if (report.num_gt > 0) {
      recalls.push_back(static_cast<double>(tp) / static_cast<double>(report.num_gt));
      precisions.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    }
  }
  report.true_positives = tp;

  // Suffix maximum: best precision at recall ≥ r.
  for (std::size_t i = precisions.size(); i-- > 1;)
    precisions[i - 1] = std::max(precisions[i - 1], precisions[i]);

  for (int k = 0; k < recall_positions; ++k) {
    const double r = recall_positions == 11 ? static_cast<double>(k) / 10.0
                                            : static_cast<double>(k + 1) / 40.0;
    report.recall_grid.push_back(r);
    double p = 0.0;
    const auto it = std::lower_bound(recalls.begin(), recalls.end(), r);
    if (it != recalls.end()) p = precisions[static_cast<std::size_t>(it - recalls.begin())];
    report.precision.push_back(p);
  }
  double total = 0.0;
  for (double p : report.precision) total += p;
  report.ap = total / static_cast<double>(recall_positions);
  return report;
}

}  // namespace ct3d

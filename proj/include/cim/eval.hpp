#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "cim/mask.hpp"
#include "cim/matrix.hpp"
#include "cim/synth.hpp"

namespace cim {

struct Prediction {
  BinaryMask mask;
  std::size_t category = 0;
  double score = 0.0;
};

inline constexpr std::array<double, 4> kEvalThresholds{0.25, 0.5, 0.7, 0.75};

// Greedy matching outcome. Flags follow rank order (score descending, ties by
// ascending input index); `order` maps rank position back to the input index.
struct MatchResult {
  std::vector<std::size_t> order;
  std::vector<std::uint8_t> is_tp;
};

// VOC-style greedy matching: walk predictions by descending score; each one
// claims the unmatched same-category ground-truth instance of highest IoU,
// provided that IoU clears the threshold. Claimed instances are consumed.
inline MatchResult match_predictions(const std::vector<Prediction>& preds, const Scene& scene,
                                     double iou_threshold) {
  MatchResult res;
  res.order.resize(preds.size());
  for (std::size_t i = 0; i < res.order.size(); ++i) res.order[i] = i;
  std::sort(res.order.begin(), res.order.end(), [&](std::size_t a, std::size_t b) {
    if (preds[a].score != preds[b].score) return preds[a].score > preds[b].score;
    return a < b;
  });

  std::vector<std::uint8_t> taken(scene.instances.size(), 0);
  res.is_tp.assign(preds.size(), 0);
  for (std::size_t rank = 0; rank < res.order.size(); ++rank) {
    const Prediction& p = preds[res.order[rank]];
    double best_iou = 0.0;
    std::size_t best_gt = scene.instances.size();
    for (std::size_t g = 0; g < scene.instances.size(); ++g) {
      if (taken[g] || scene.instances[g].category != p.category) continue;
      const double v = iou(p.mask, scene.instances[g].mask);
      if (v > best_iou) {
        best_iou = v;
        best_gt = g;
      }
    }
    if (best_gt < scene.instances.size() && best_iou > iou_threshold) {
      res.is_tp[rank] = 1;
      taken[best_gt] = 1;
    }
  }
  return res;
}

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

// Area under the precision envelope over recall, all-points interpolation.
// Undefined (NaN) when there are no ground-truth instances.
inline double average_precision(const std::vector<std::uint8_t>& tp_flags, std::size_t gt_count,
                                std::vector<PrPoint>* curve = nullptr) {
  if (gt_count == 0) return std::numeric_limits<double>::quiet_NaN();

  std::vector<double> precision(tp_flags.size()), recall(tp_flags.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < tp_flags.size(); ++i) {
    tp += tp_flags[i] ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(gt_count);
  }
  // Precision envelope from the right, then sum recall steps.
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  if (curve) {
    curve->clear();
    for (std::size_t i = 0; i < precision.size(); ++i) curve->push_back({recall[i], precision[i]});
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

struct CategoryEval {
  std::size_t category = 0;
  std::size_t gt_count = 0;
  std::array<double, 4> ap{};
  std::array<std::vector<PrPoint>, 4> pr;
};

struct EvalResult {
  std::vector<CategoryEval> categories;  // categories present in the ground truth
  std::array<double, 4> map{};           // mean AP per threshold
};

// Mean average precision at the four thresholds, averaged over categories that
// have at least one ground-truth instance.
inline EvalResult evaluate(const std::vector<Prediction>& preds, const Scene& scene) {
  EvalResult out;
  std::vector<std::size_t> gt_per_cat(scene.num_categories + 1, 0);
  for (const GtInstance& g : scene.instances) ++gt_per_cat[g.category];

  for (std::size_t c = 1; c <= scene.num_categories; ++c) {
    if (gt_per_cat[c] == 0) continue;
    std::vector<Prediction> cat_preds;
    for (const Prediction& p : preds) {
      if (p.category == c) cat_preds.push_back(p);
    }
    CategoryEval ce;
    ce.category = c;
    ce.gt_count = gt_per_cat[c];
    for (std::size_t t = 0; t < kEvalThresholds.size(); ++t) {
      const MatchResult m = match_predictions(cat_preds, scene, kEvalThresholds[t]);
      ce.ap[t] = average_precision(m.is_tp, gt_per_cat[c], &ce.pr[t]);
    }
    out.categories.push_back(std::move(ce));
  }

  for (std::size_t t = 0; t < kEvalThresholds.size(); ++t) {
    double sum = 0.0;
    for (const CategoryEval& ce : out.categories) sum += ce.ap[t];
    out.map[t] = out.categories.empty() ? 0.0 : sum / static_cast<double>(out.categories.size());
  }
  return out;
}

// Turns fused per-proposal scores into a prediction list: one entry per
// non-empty proposal and foreground category.
inline std::vector<Prediction> predictions_from_scores(const MaskSet& proposals,
                                                       const Matrix& scores) {
  std::vector<Prediction> preds;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (proposals[i].empty()) continue;
    for (std::size_t c = 1; c < scores.cols(); ++c) {
      preds.push_back({proposals[i], c, scores.at(i, c)});
    }
  }
  return preds;
}

}  // namespace cim

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cim/errors.hpp"
#include "cim/geometry.hpp"
#include "cim/mask.hpp"
#include "cim/score_table.hpp"

namespace cim {

// Mining and label-refinement knobs. Defaults follow the reference setup:
// classification/integrity thresholds 0.25/0.5, cascade step 0.1, containment
// threshold 0.85, NMS threshold equal to tau_cls, top 10% seeds, 3 branches.
struct CimConfig {
  double tau_cls = 0.25;
  double tau_iou = 0.5;
  double tau_cas = 0.1;
  double tau_con = 0.85;
  double tau_nms = 0.25;
  double p_seed = 0.1;
  std::size_t branch_count = 3;
  bool nms_on_boxes = false;  // suppress by bounding-box IoU instead of mask IoU
  bool multi_label = false;   // allow one proposal to clear tau_cls for several categories

  void validate() const {
    if (!(p_seed > 0.0 && p_seed <= 1.0)) throw ConfigError("p_seed must be in (0, 1]");
    if (!(tau_cls >= 0.0 && tau_cls <= tau_iou && tau_iou <= 1.0)) {
      throw ConfigError("need 0 <= tau_cls <= tau_iou <= 1");
    }
    if (!(tau_con >= 0.0 && tau_con < 1.0)) throw ConfigError("tau_con must be in [0, 1)");
    if (!(tau_nms >= 0.0 && tau_nms <= 1.0)) throw ConfigError("tau_nms must be in [0, 1]");
    if (tau_cas < 0.0) throw ConfigError("tau_cas must be >= 0");
    if (branch_count == 0) throw ConfigError("branch_count must be >= 1");
  }
};

// Branches are 1-based; branch k tightens both thresholds by (k-1) cascade steps.
inline double effective_threshold(double base, std::size_t branch_k, double tau_cas) {
  return base + static_cast<double>(branch_k - 1) * tau_cas;
}

// ceil(p * n), at least 1. The product is nudged one ulp down first so a
// mathematically integral p*n (e.g. 0.1 * 20) cannot round up past itself.
inline std::size_t seed_keep_count(double p, std::size_t n) {
  if (n == 0) return 0;
  const double raw = std::nextafter(p * static_cast<double>(n), 0.0);
  const auto count = static_cast<std::size_t>(std::ceil(raw));
  return std::clamp<std::size_t>(count, 1, n);
}

// Per-category seed proposals, index 0 unused.
struct SeedSelection {
  std::vector<std::vector<std::size_t>> by_category;

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& v : by_category) t += v.size();
    return t;
  }
};

// Step 1: for each present category, rank proposals by classification score
// (ties by ascending index), keep the top p_seed fraction, then greedy-NMS.
inline SeedSelection select_seeds(const ScoreTable& y_prev, const MaskSet& proposals,
                                  const ImageLabel& image_label, const CimConfig& cfg) {
  const std::size_t n = proposals.size();
  const std::size_t num_cats = y_prev.categories();
  check_table_shape(y_prev, n, num_cats);
  if (image_label.size() != num_cats + 1) {
    throw std::invalid_argument("image label size mismatch");
  }

  SeedSelection out;
  out.by_category.assign(num_cats + 1, {});
  if (n == 0) return out;

  std::vector<std::size_t> order(n);
  for (std::size_t c = 1; c <= num_cats; ++c) {
    if (!image_label[c]) continue;
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double sa = y_prev.values.at(a, c), sb = y_prev.values.at(b, c);
      if (sa != sb) return sa > sb;
      return a < b;
    });
    const std::size_t keep = seed_keep_count(cfg.p_seed, n);
    const std::span<const std::size_t> top(order.data(), keep);
    out.by_category[c] = cfg.nms_on_boxes ? bbox_nms(top, proposals, cfg.tau_nms)
                                          : mask_nms(top, proposals, cfg.tau_nms);
  }
  return out;
}

// One mined pseudo-ground-truth proposal and the seed that produced it.
struct GtEntry {
  std::size_t proposal = 0;
  std::size_t seed = 0;
  friend bool operator==(const GtEntry&, const GtEntry&) = default;
};

struct PseudoGroundTruth {
  std::vector<std::vector<GtEntry>> per_category;  // index 0 unused

  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& v : per_category) t += v.size();
    return t;
  }
  bool empty() const { return total() == 0; }
};

// Step 2: each seed pulls in the proposal that contains it at fraction
// > tau_con and has the highest integrity score (ties by ascending row index).
// Duplicate picks within a category are dropped, keeping the first provenance.
inline PseudoGroundTruth mine_pseudo_gt(const SeedSelection& seeds, const ScoreTable& t_prev,
                                        const MaskSet& proposals, const CimConfig& cfg) {
  const std::size_t n = proposals.size();
  const std::size_t num_cats = t_prev.categories();
  check_table_shape(t_prev, n, num_cats);
  if (seeds.by_category.size() != num_cats + 1) {
    throw std::invalid_argument("seed selection category count mismatch");
  }

  PseudoGroundTruth out;
  out.per_category.assign(num_cats + 1, {});
  for (std::size_t c = 1; c <= num_cats; ++c) {
    const std::vector<std::size_t>& seed_list = seeds.by_category[c];
    if (seed_list.empty()) continue;
    const Matrix cont = containment_matrix(proposals, seed_list);
    for (std::size_t j = 0; j < seed_list.size(); ++j) {
      std::optional<std::size_t> best;
      for (std::size_t i = 0; i < n; ++i) {
        if (!(cont.at(i, j) > cfg.tau_con)) continue;
        if (!best || t_prev.values.at(i, c) > t_prev.values.at(*best, c)) best = i;
      }
      if (!best) continue;  // empty seed mask: nothing contains it
      auto& entries = out.per_category[c];
      const bool duplicate = std::any_of(entries.begin(), entries.end(),
                                         [&](const GtEntry& e) { return e.proposal == *best; });
      if (!duplicate) entries.push_back({*best, seed_list[j]});
    }
  }
  return out;
}

// Refined pseudo labels for one branch: one-hot classification and integrity
// targets plus per-proposal loss weights. All-zero rows are unlabeled.
struct RefinedLabels {
  Matrix y_hat;
  Matrix t_hat;
  std::vector<double> w;
  std::size_t fg_count = 0;
  std::size_t bg_count = 0;
};

// Assigns refined labels against the mined pseudo ground truth using the
// branch's cascaded thresholds. Default reading gives each proposal at most
// one category, taken from its globally best-overlapping entry; proposals
// clearing no threshold but touching some entry become background. Loss
// weights come from the scores of that best entry.
inline RefinedLabels assign_refined_labels(const PseudoGroundTruth& gt, const MaskSet& proposals,
                                           const ScoreTable& y_prev, const ScoreTable& t_prev,
                                           std::size_t branch_k, const CimConfig& cfg) {
  const std::size_t n = proposals.size();
  const std::size_t num_cats = y_prev.categories();
  check_table_shape(y_prev, n, num_cats);
  check_table_shape(t_prev, n, num_cats);
  if (gt.per_category.size() != num_cats + 1) {
    throw std::invalid_argument("pseudo ground truth category count mismatch");
  }
  if (branch_k == 0) throw std::invalid_argument("branch_k is 1-based");

  const double tau_cls_eff = effective_threshold(cfg.tau_cls, branch_k, cfg.tau_cas);
  const double tau_iou_eff = effective_threshold(cfg.tau_iou, branch_k, cfg.tau_cas);

  RefinedLabels out;
  out.y_hat = Matrix(n, num_cats + 1, 0.0);
  out.t_hat = Matrix(n, num_cats + 1, 0.0);
  out.w.assign(n, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    double best_iou = 0.0;
    std::size_t best_cat = 0, best_gt = 0;
    bool has_best = false, touches = false;
    std::vector<double> cat_best(num_cats + 1, 0.0);

    for (std::size_t c = 1; c <= num_cats; ++c) {
      for (const GtEntry& e : gt.per_category[c]) {
        const double v = iou(proposals[i], proposals[e.proposal]);
        touches = touches || v > 0.0;
        cat_best[c] = std::max(cat_best[c], v);
        // Ties resolve by ascending entry proposal index, then category.
        const bool better =
            !has_best || v > best_iou ||
            (v == best_iou && (e.proposal < best_gt || (e.proposal == best_gt && c < best_cat)));
        if (better) {
          best_iou = v;
          best_cat = c;
          best_gt = e.proposal;
          has_best = true;
        }
      }
    }
    if (!has_best) continue;

    bool foreground = false;
    if (cfg.multi_label) {
      for (std::size_t c = 1; c <= num_cats; ++c) {
        if (cat_best[c] > tau_cls_eff) {
          out.y_hat.at(i, c) = 1.0;
          foreground = true;
        }
        if (cat_best[c] > tau_iou_eff) out.t_hat.at(i, c) = 1.0;
      }
    } else if (best_iou > tau_cls_eff) {
      out.y_hat.at(i, best_cat) = 1.0;
      foreground = true;
      if (best_iou > tau_iou_eff) out.t_hat.at(i, best_cat) = 1.0;
    }

    if (foreground) {
      ++out.fg_count;
    } else if (touches) {
      out.y_hat.at(i, 0) = 1.0;
      ++out.bg_count;
    } else {
      continue;
    }
    out.w[i] = y_prev.values.at(best_gt, best_cat) * t_prev.values.at(best_gt, best_cat);
  }
  return out;
}

struct CimBranchResult {
  SeedSelection seeds;
  PseudoGroundTruth gt;
  RefinedLabels labels;
};

// Full per-branch pass: seed selection, mining, refined label assignment.
inline CimBranchResult run_cim_branch(const ScoreTable& y_prev, const ScoreTable& t_prev,
                                      const MaskSet& proposals, const ImageLabel& image_label,
                                      std::size_t branch_k, const CimConfig& cfg) {
  CimBranchResult r;
  r.seeds = select_seeds(y_prev, proposals, image_label, cfg);
  r.gt = mine_pseudo_gt(r.seeds, t_prev, proposals, cfg);
  r.labels = assign_refined_labels(r.gt, proposals, y_prev, t_prev, branch_k, cfg);
  return r;
}

}  // namespace cim

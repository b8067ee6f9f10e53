#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "cim/mask.hpp"
#include "cim/score_table.hpp"

namespace cim {

// A confident activation peak used as an instance cue. Categories are 1..C;
// background (0) never has peaks.
struct PeakCue {
  std::size_t category = 0;
  double score = 0.0;
  std::size_t row = 0;
  std::size_t col = 0;
};

// Thresholded mean of all proposals covering one peak.
struct SupportMask {
  BinaryMask mask;
  std::size_t category = 0;
  double peak_score = 0.0;
  std::size_t supporter_count = 0;  // proposals containing the peak
};

inline constexpr double kSupportMeanThreshold = 0.7;
inline constexpr double kSupportAssignIou = 0.5;

// For each peak, averages and thresholds the proposals covering its pixel.
// Peaks covered by no proposal are dropped.
inline std::vector<SupportMask> compute_support_masks(const MaskSet& proposals,
                                                      const std::vector<PeakCue>& peaks,
                                                      double mean_thr = kSupportMeanThreshold) {
  std::vector<SupportMask> supports;
  for (const PeakCue& p : peaks) {
    if (p.row >= proposals.height() || p.col >= proposals.width()) {
      throw std::invalid_argument("peak outside canvas");
    }
    if (p.category == 0) throw std::invalid_argument("peak category must be foreground");
    std::vector<BinaryMask> covering;
    for (std::size_t i = 0; i < proposals.size(); ++i) {
      if (proposals[i].contains(p.row, p.col)) covering.push_back(proposals[i]);
    }
    if (covering.empty()) continue;
    supports.push_back({mean_threshold(std::span<const BinaryMask>(covering), mean_thr),
                        p.category, p.score, covering.size()});
  }
  return supports;
}

// Pre-computed proposal labels: a one-hot-or-zero N×(C+1) matrix plus, for
// foreground rows, the support mask that assigned them. All-zero rows are
// unlabeled and ignored by every loss.
struct PrecomputedLabels {
  Matrix y_hat0;
  std::vector<std::optional<std::size_t>> assigned_support;

  std::size_t proposals() const { return y_hat0.rows(); }
  std::size_t categories() const { return y_hat0.cols() == 0 ? 0 : y_hat0.cols() - 1; }

  // Category of proposal i: nullopt when unlabeled, 0 for background.
  std::optional<std::size_t> label_of(std::size_t i) const {
    for (std::size_t c = 0; c < y_hat0.cols(); ++c) {
      if (y_hat0.at(i, c) != 0.0) return c;
    }
    return std::nullopt;
  }
};

// Sweeps supports in descending peak-score order (ties by ascending support
// index); the first support with IoU > 0.5 claims the proposal. Unclaimed
// proposals that still intersect some support mask become background; fully
// disjoint proposals stay unlabeled.
inline PrecomputedLabels assign_precomputed_labels(const MaskSet& proposals,
                                                   const std::vector<SupportMask>& supports,
                                                   std::size_t num_categories,
                                                   double iou_thr = kSupportAssignIou) {
  for (const SupportMask& s : supports) {
    if (s.category == 0 || s.category > num_categories) {
      throw std::invalid_argument("support mask category out of range");
    }
  }
  const std::size_t n = proposals.size();
  PrecomputedLabels out;
  out.y_hat0 = Matrix(n, num_categories + 1, 0.0);
  out.assigned_support.assign(n, std::nullopt);

  std::vector<std::size_t> order(supports.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (supports[a].peak_score != supports[b].peak_score) {
      return supports[a].peak_score > supports[b].peak_score;
    }
    return a < b;
  });

  for (std::size_t s : order) {
    for (std::size_t i = 0; i < n; ++i) {
      if (out.assigned_support[i].has_value()) continue;
      if (iou(proposals[i], supports[s].mask) > iou_thr) {
        out.y_hat0.at(i, supports[s].category) = 1.0;
        out.assigned_support[i] = s;
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (out.assigned_support[i].has_value()) continue;
    for (const SupportMask& s : supports) {
      if (intersection_area(proposals[i], s.mask) > 0) {
        out.y_hat0.at(i, 0) = 1.0;
        break;
      }
    }
  }
  return out;
}

// Proposals assigned by the same support mask, used by the cluster term of the
// anti-noise objective. Background proposals are singleton clusters.
struct ProposalCluster {
  std::vector<std::size_t> members;
  std::size_t category = 0;
};

struct ProposalClusterSet {
  std::vector<ProposalCluster> clusters;
  std::size_t num_categories = 0;

  std::size_t labeled_count() const {
    std::size_t total = 0;
    for (const ProposalCluster& c : clusters) total += c.members.size();
    return total;
  }
};

inline ProposalClusterSet build_clusters(const PrecomputedLabels& labels) {
  ProposalClusterSet set;
  set.num_categories = labels.categories();

  std::vector<std::vector<std::size_t>> by_support;
  std::vector<std::size_t> background;
  for (std::size_t i = 0; i < labels.proposals(); ++i) {
    if (labels.assigned_support[i].has_value()) {
      const std::size_t s = *labels.assigned_support[i];
      if (by_support.size() <= s) by_support.resize(s + 1);
      by_support[s].push_back(i);
    } else if (labels.y_hat0.at(i, 0) != 0.0) {
      background.push_back(i);
    }
  }
  for (std::size_t s = 0; s < by_support.size(); ++s) {
    if (by_support[s].empty()) continue;
    const std::size_t cat = *labels.label_of(by_support[s].front());
    set.clusters.push_back({by_support[s], cat});
  }
  for (std::size_t i : background) set.clusters.push_back({{i}, 0});
  return set;
}

}  // namespace cim

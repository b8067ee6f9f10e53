#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "cim/mask.hpp"
#include "cim/matrix.hpp"

namespace cim {

// Pairwise IoU over the whole set. Symmetric; diagonal is 1 for non-empty masks.
inline Matrix iou_matrix(const MaskSet& set) {
  const std::size_t n = set.size();
  Matrix m(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    m.at(i, i) = set[i].empty() ? 0.0 : 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = iou(set[i], set[j]);
      m.at(i, j) = v;
      m.at(j, i) = v;
    }
  }
  return m;
}

// Entry (i, j) = |R_i ∩ R_cols[j]| / |R_cols[j]|, 0 when the column mask is empty.
inline Matrix containment_matrix(const MaskSet& set, std::span<const std::size_t> columns) {
  const std::size_t n = set.size();
  for (std::size_t c : columns) {
    if (c >= n) throw std::out_of_range("containment_matrix: column index out of range");
  }
  Matrix m(n, columns.size(), 0.0);
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const BinaryMask& col = set[columns[j]];
    if (col.empty()) continue;
    const double denom = static_cast<double>(col.area());
    for (std::size_t i = 0; i < n; ++i) {
      m.at(i, j) = static_cast<double>(intersection_area(set[i], col)) / denom;
    }
  }
  return m;
}

inline Matrix containment_matrix(const MaskSet& set) {
  std::vector<std::size_t> all(set.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return containment_matrix(set, all);
}

// Greedy suppression over a score-ordered candidate list: keep the first, drop
// any later candidate whose IoU with a kept mask exceeds the threshold. The
// kept list preserves input order.
template <typename IouFn>
inline std::vector<std::size_t> greedy_nms(std::span<const std::size_t> candidates,
                                           const MaskSet& set, double threshold,
                                           IouFn&& pair_iou) {
  std::vector<std::size_t> kept;
  for (std::size_t c : candidates) {
    if (c >= set.size()) throw std::out_of_range("nms: candidate index out of range");
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (pair_iou(set[k], set[c]) > threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(c);
  }
  return kept;
}

inline std::vector<std::size_t> mask_nms(std::span<const std::size_t> candidates,
                                         const MaskSet& set, double threshold) {
  return greedy_nms(candidates, set, threshold,
                    [](const BinaryMask& a, const BinaryMask& b) { return iou(a, b); });
}

// IoU of the masks' bounding boxes; empty masks never overlap anything.
inline double bbox_iou(const BinaryMask& a, const BinaryMask& b) {
  const auto ba = a.bbox(), bb = b.bbox();
  if (!ba || !bb) return 0.0;
  const std::size_t r0 = std::max(ba->row0, bb->row0), r1 = std::min(ba->row1, bb->row1);
  const std::size_t c0 = std::max(ba->col0, bb->col0), c1 = std::min(ba->col1, bb->col1);
  if (r0 > r1 || c0 > c1) return 0.0;
  const double inter = static_cast<double>((r1 - r0 + 1) * (c1 - c0 + 1));
  const double area_a = static_cast<double>((ba->row1 - ba->row0 + 1) * (ba->col1 - ba->col0 + 1));
  const double area_b = static_cast<double>((bb->row1 - bb->row0 + 1) * (bb->col1 - bb->col0 + 1));
  return inter / (area_a + area_b - inter);
}

inline std::vector<std::size_t> bbox_nms(std::span<const std::size_t> candidates,
                                         const MaskSet& set, double threshold) {
  return greedy_nms(candidates, set, threshold, bbox_iou);
}

}  // namespace cim

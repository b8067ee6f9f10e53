#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "cim/agpl.hpp"
#include "cim/mining.hpp"
#include "cim/rng.hpp"
#include "cim/score_table.hpp"

namespace cim {

inline constexpr double kLogClamp = 1e-12;

inline double clamp_probability(double p) {
  return std::clamp(p, kLogClamp, 1.0 - kLogClamp);
}

// Smooth-L1 with the usual beta=1 transition.
inline double smooth_l1(double x, double beta = 1.0) {
  const double a = std::abs(x);
  return a < beta ? 0.5 * x * x : a - 0.5 * beta;
}

struct RefinementLossBreakdown {
  double classification = 0.0;
  double integrity = 0.0;
  double total = 0.0;
};

// Weighted cross-entropy over all C+1 columns plus a smooth-L1 integrity term
// over foreground columns. With no foreground the integrity term vanishes and
// the CE normalizer falls back to the background count; with neither, zero.
inline RefinementLossBreakdown refinement_loss(const ScoreTable& y_k, const ScoreTable& t_k,
                                               const RefinedLabels& labels) {
  const std::size_t n = labels.y_hat.rows();
  const std::size_t num_cats = labels.y_hat.cols() == 0 ? 0 : labels.y_hat.cols() - 1;
  check_table_shape(y_k, n, num_cats);
  check_table_shape(t_k, n, num_cats);

  RefinementLossBreakdown out;
  const std::size_t denom_ce = labels.fg_count + labels.bg_count;
  if (denom_ce == 0) return out;

  double ce = 0.0, reg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c <= num_cats; ++c) {
      if (labels.y_hat.at(i, c) == 0.0) continue;
      ce -= labels.w[i] * std::log(clamp_probability(y_k.values.at(i, c)));
      if (c >= 1) {
        reg += labels.w[i] * smooth_l1(labels.t_hat.at(i, c) - t_k.values.at(i, c));
      }
    }
  }
  out.classification = ce / static_cast<double>(denom_ce);
  out.integrity = labels.fg_count > 0 ? reg / static_cast<double>(labels.fg_count) : 0.0;
  out.total = out.classification + out.integrity;
  return out;
}

enum class ImageScoreMode {
  clamp,    // clamp the raw proposal sum into [0, 1]
  softmax,  // softmax the integrity table over proposals before summing
};

// Image-level score per category: sum over proposals of y ⊙ t.
inline std::vector<double> image_score(const ScoreTable& y0, const ScoreTable& t0,
                                       ImageScoreMode mode = ImageScoreMode::clamp) {
  const std::size_t n = y0.values.rows();
  const std::size_t cols = y0.values.cols();
  if (t0.values.rows() != n || t0.values.cols() != cols) {
    throw std::invalid_argument("image_score: table shape mismatch");
  }
  std::vector<double> score(cols, 0.0);
  for (std::size_t c = 0; c < cols; ++c) {
    if (mode == ImageScoreMode::softmax && n > 0) {
      double maxv = t0.values.at(0, c);
      for (std::size_t i = 1; i < n; ++i) maxv = std::max(maxv, t0.values.at(i, c));
      double z = 0.0;
      for (std::size_t i = 0; i < n; ++i) z += std::exp(t0.values.at(i, c) - maxv);
      for (std::size_t i = 0; i < n; ++i) {
        score[c] += y0.values.at(i, c) * (std::exp(t0.values.at(i, c) - maxv) / z);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        score[c] += y0.values.at(i, c) * t0.values.at(i, c);
      }
    }
    score[c] = std::clamp(score[c], 0.0, 1.0);
  }
  return score;
}

struct AntiNoiseLossBreakdown {
  double bce = 0.0;
  double pcl = 0.0;
  double total = 0.0;
};

// Binary cross-entropy on the image-level score plus the cluster term: each
// cluster pushes up the mean classification score of its members at the
// cluster's category, weighted by cluster size and alpha.
inline AntiNoiseLossBreakdown anti_noise_loss(const ScoreTable& y0, const ScoreTable& t0,
                                              const ImageLabel& image_label,
                                              const ProposalClusterSet& clusters,
                                              double alpha = 12.0,
                                              ImageScoreMode mode = ImageScoreMode::clamp) {
  const std::size_t num_cats = y0.categories();
  if (image_label.size() != num_cats + 1) {
    throw std::invalid_argument("anti_noise_loss: image label size mismatch");
  }
  if (image_label[0] != 1) throw std::invalid_argument("anti_noise_loss: Y_0 must be 1");

  AntiNoiseLossBreakdown out;
  const std::vector<double> yi = image_score(y0, t0, mode);
  double bce = 0.0;
  for (std::size_t c = 0; c <= num_cats; ++c) {
    if (image_label[c]) {
      bce -= std::log(clamp_probability(yi[c]));
    } else {
      bce -= std::log(clamp_probability(1.0 - yi[c]));
    }
  }
  out.bce = bce / static_cast<double>(num_cats + 1);

  std::size_t n_fg = 0, n_bg = 0;
  for (const ProposalCluster& cl : clusters.clusters) {
    if (cl.category == 0) n_bg += cl.members.size();
    else n_fg += cl.members.size();
  }
  if (n_fg + n_bg > 0) {
    double pcl = 0.0;
    for (const ProposalCluster& cl : clusters.clusters) {
      if (cl.category > num_cats) throw std::out_of_range("cluster category out of range");
      const auto m = static_cast<double>(cl.members.size());
      double mean = 0.0;
      for (std::size_t i : cl.members) {
        if (i >= y0.values.rows()) throw std::out_of_range("cluster member out of range");
        mean += y0.values.at(i, cl.category) / m;
      }
      pcl -= m * std::log(clamp_probability(mean));
    }
    out.pcl = alpha * pcl / static_cast<double>(n_fg + n_bg);
  }
  out.total = out.bce + out.pcl;
  return out;
}

// Whole-objective report. The total is always the exact sum of the stored
// components, so the decomposition identity holds by construction.
struct LossReport {
  std::vector<RefinementLossBreakdown> ref;  // one per refinement branch
  AntiNoiseLossBreakdown anti;

  double total() const {
    double t = anti.total;
    for (const RefinementLossBreakdown& r : ref) t += r.total;
    return t;
  }
};

// Deterministic weighted sampling with replacement. A fixed seed reproduces
// the exact draw sequence; all-zero weight vectors fall back to uniform.
class WeightedSampler {
public:
  explicit WeightedSampler(std::uint64_t seed) : seed_(seed), rng_(seed) {}

  std::size_t draw(std::span<const double> weights) {
    if (weights.empty()) throw std::invalid_argument("sampler: empty weight vector");
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw std::invalid_argument("sampler: negative weight");
      total += w;
    }
    ++draws_;
    if (total <= 0.0) return static_cast<std::size_t>(rng_.below(weights.size()));
    const double target = rng_.unit() * total;
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      cum += weights[i];
      if (target < cum) return i;
    }
    return weights.size() - 1;
  }

  std::vector<std::size_t> draw_many(std::span<const double> weights, std::size_t count) {
    std::vector<std::size_t> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(draw(weights));
    return out;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draw_count() const { return draws_; }

private:
  std::uint64_t seed_ = 0;
  Rng rng_;
  std::uint64_t draws_ = 0;
};

// Resamples the mined pseudo ground truth with replacement, per category, with
// each entry's loss weight (classification times integrity score) as its
// sampling weight. The drawn multiset keeps the original entry count per
// category and replaces the mined set for label assignment.
inline PseudoGroundTruth anti_noise_sample(const PseudoGroundTruth& gt, const ScoreTable& y_prev,
                                           const ScoreTable& t_prev, WeightedSampler& sampler) {
  PseudoGroundTruth out;
  out.per_category.assign(gt.per_category.size(), {});
  for (std::size_t c = 1; c < gt.per_category.size(); ++c) {
    const auto& entries = gt.per_category[c];
    if (entries.empty()) continue;
    std::vector<double> weights;
    weights.reserve(entries.size());
    for (const GtEntry& e : entries) {
      weights.push_back(y_prev.values.at(e.proposal, c) * t_prev.values.at(e.proposal, c));
    }
    for (std::size_t pick : sampler.draw_many(weights, entries.size())) {
      out.per_category[c].push_back(entries[pick]);
    }
  }
  return out;
}

}  // namespace cim

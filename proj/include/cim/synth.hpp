#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cim/agpl.hpp"
#include "cim/errors.hpp"
#include "cim/losses.hpp"
#include "cim/mask.hpp"
#include "cim/mining.hpp"
#include "cim/rng.hpp"
#include "cim/score_table.hpp"

namespace cim {

struct GtInstance {
  BinaryMask mask;
  std::size_t category = 0;
};

// Synthetic image: ground-truth instances on a fixed canvas. The image-level
// label is derived from the instances, with background always present.
struct Scene {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t num_categories = 0;
  std::vector<GtInstance> instances;

  ImageLabel image_label() const {
    ImageLabel y(num_categories + 1, 0);
    y[0] = 1;
    for (const GtInstance& g : instances) y[g.category] = 1;
    return y;
  }
};

struct SceneConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t num_categories = 3;
  std::size_t num_instances = 3;
  std::size_t min_side = 10;
  std::size_t max_side = 22;
  double compound_prob = 0.3;  // chance an instance is a union of two rectangles
  std::size_t max_attempts = 500;

  void validate() const {
    if (num_instances == 0) throw ConfigError("num_instances must be >= 1");
    if (num_categories == 0) throw ConfigError("num_categories must be >= 1");
    if (min_side < 2 || max_side < min_side) throw ConfigError("bad instance side range");
    if (max_side >= height || max_side >= width) {
      throw ConfigError("max_side must be smaller than the canvas");
    }
    if (compound_prob < 0.0 || compound_prob > 1.0) {
      throw ConfigError("compound_prob must be in [0, 1]");
    }
  }
};

// Places disjoint rectangle (or two-rectangle union) instances by rejection
// sampling. Throws ConfigError when the retry budget runs out.
inline Scene generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed(seed, "scene"));
  Scene scene{cfg.height, cfg.width, cfg.num_categories, {}};

  for (std::size_t k = 0; k < cfg.num_instances; ++k) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
      const std::size_t hh = static_cast<std::size_t>(
          rng.range(static_cast<std::int64_t>(cfg.min_side), static_cast<std::int64_t>(cfg.max_side)));
      const std::size_t ww = static_cast<std::size_t>(
          rng.range(static_cast<std::int64_t>(cfg.min_side), static_cast<std::int64_t>(cfg.max_side)));
      const std::size_t r0 = rng.below(cfg.height - hh);
      const std::size_t c0 = rng.below(cfg.width - ww);
      BinaryMask mask = BinaryMask::rect(cfg.height, cfg.width, r0, c0, r0 + hh - 1, c0 + ww - 1);

      if (rng.unit() < cfg.compound_prob) {
        // Second rectangle anchored inside the first so the union stays connected.
        const std::size_t h2 = std::max<std::size_t>(2, hh / 2);
        const std::size_t w2 = std::max<std::size_t>(2, ww / 2);
        const std::size_t ar = r0 + rng.below(hh);
        const std::size_t ac = c0 + rng.below(ww);
        BinaryMask extra = BinaryMask::rect(cfg.height, cfg.width, ar, ac,
                                            std::min(cfg.height - 1, ar + h2 - 1),
                                            std::min(cfg.width - 1, ac + w2 - 1));
        std::vector<Run> runs = mask.runs();
        runs.insert(runs.end(), extra.runs().begin(), extra.runs().end());
        mask = BinaryMask::from_runs(cfg.height, cfg.width, std::move(runs));
      }

      bool overlaps = false;
      for (const GtInstance& g : scene.instances) {
        if (intersection_area(mask, g.mask) > 0) {
          overlaps = true;
          break;
        }
      }
      if (!overlaps) {
        const std::size_t cat = 1 + rng.below(cfg.num_categories);
        scene.instances.push_back({std::move(mask), cat});
        placed = true;
      }
    }
    if (!placed) throw ConfigError("generate_scene: could not place instance within retry budget");
  }
  return scene;
}

enum class ProposalKind { full, fragment, enlarged, background };

struct ProposalProvenance {
  std::optional<std::size_t> instance;  // source instance, nullopt for background
  ProposalKind kind = ProposalKind::background;
};

// Per-instance proposal counts emulating redundant segmentation: near-complete
// copies, discriminative fragments, sloppy enlarged variants, plus clutter.
struct ProposalRecipe {
  std::size_t full_copies = 2;
  std::size_t fragments = 3;
  std::size_t enlarged = 1;
  std::size_t background_count = 4;
  std::size_t jitter_px = 1;
  double fragment_min_frac = 0.25;
  double fragment_max_frac = 0.45;
  std::size_t max_attempts = 50;

  void validate() const {
    if (full_copies == 0) throw ConfigError("full_copies must be >= 1 per instance");
    if (!(fragment_min_frac > 0.0 && fragment_min_frac <= fragment_max_frac &&
          fragment_max_frac < 0.5)) {
      throw ConfigError("fragment fractions must satisfy 0 < min <= max < 0.5");
    }
  }
};

struct GeneratedProposals {
  MaskSet masks;
  std::vector<ProposalProvenance> provenance;
  std::vector<std::string> warnings;
};

namespace detail {

// Keeps the smallest row-band of the mask holding at least `frac` of its area.
// Band side and a column crop are randomized; result is a strict subset.
inline BinaryMask row_band_fragment(const BinaryMask& mask, double frac, Rng& rng) {
  const auto box = mask.bbox();
  if (!box) return mask;
  const std::size_t target = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(frac * static_cast<double>(mask.area()))));
  const bool from_top = rng.below(2) == 0;
  std::vector<std::uint8_t> dense = mask.to_dense();
  const std::size_t w = mask.width();

  std::size_t kept = 0;
  std::size_t lo = box->row0, hi = box->row1;
  std::vector<Run> runs;
  auto take_row = [&](std::size_t r) {
    for (std::size_t c = 0; c < w; ++c) {
      if (dense[r * w + c]) {
        std::size_t e = c;
        while (e < w && dense[r * w + e]) ++e;
        runs.push_back({static_cast<std::uint32_t>(r * w + c), static_cast<std::uint32_t>(e - c)});
        kept += e - c;
        c = e;
      }
    }
  };
  while (kept < target && lo <= hi) {
    if (from_top) take_row(lo++);
    else take_row(hi--);
  }
  return BinaryMask::from_runs(mask.height(), mask.width(), std::move(runs));
}

inline BinaryMask jittered_copy(const BinaryMask& mask, std::size_t jitter_px, Rng& rng) {
  const auto j = static_cast<std::int64_t>(jitter_px);
  return mask.shifted(rng.range(-j, j), rng.range(-j, j));
}

}  // namespace detail

// Builds the redundant proposal pool. Construction guarantees, asserted before
// returning: every instance has a proposal with IoU > 0.8 and, when fragments
// are requested, a fragment with IoU < 0.5 contained in it at fraction > 0.9.
inline GeneratedProposals generate_proposals(const Scene& scene, const ProposalRecipe& recipe,
                                             std::uint64_t seed) {
  recipe.validate();
  Rng rng(derive_seed(seed, "proposals"));
  GeneratedProposals out{MaskSet(scene.height, scene.width), {}, {}};

  auto add = [&](BinaryMask m, std::optional<std::size_t> instance, ProposalKind kind) {
    out.masks.add(std::move(m));
    out.provenance.push_back({instance, kind});
  };

  for (std::size_t gi = 0; gi < scene.instances.size(); ++gi) {
    const BinaryMask& inst = scene.instances[gi].mask;

    // First full copy is exact; the rest carry boundary jitter but must stay
    // near-complete. Jitter that empties the mask or drags IoU below 0.8 is
    // retried, then dropped with a warning.
    add(inst, gi, ProposalKind::full);
    for (std::size_t k = 1; k < recipe.full_copies; ++k) {
      bool emitted = false;
      for (std::size_t attempt = 0; attempt < recipe.max_attempts; ++attempt) {
        BinaryMask copy = detail::jittered_copy(inst, recipe.jitter_px, rng);
        if (!copy.empty() && iou(copy, inst) > 0.8) {
          add(std::move(copy), gi, ProposalKind::full);
          emitted = true;
          break;
        }
      }
      if (!emitted) {
        out.warnings.push_back("full copy dropped for instance " + std::to_string(gi));
      }
    }

    for (std::size_t k = 0; k < recipe.fragments; ++k) {
      bool emitted = false;
      for (std::size_t attempt = 0; attempt < recipe.max_attempts; ++attempt) {
        const double frac = recipe.fragment_min_frac +
                            rng.unit() * (recipe.fragment_max_frac - recipe.fragment_min_frac);
        BinaryMask frag = detail::row_band_fragment(inst, frac, rng);
        if (!frag.empty() && iou(frag, inst) < 0.5 &&
            static_cast<double>(intersection_area(frag, inst)) /
                    static_cast<double>(frag.area()) > 0.9) {
          add(std::move(frag), gi, ProposalKind::fragment);
          emitted = true;
          break;
        }
      }
      if (!emitted) {
        out.warnings.push_back("fragment dropped for instance " + std::to_string(gi));
      }
    }

    for (std::size_t k = 0; k < recipe.enlarged; ++k) {
      const auto box = inst.bbox();
      const std::size_t grow = 2 + rng.below(3);
      const std::size_t r0 = box->row0 > grow ? box->row0 - grow : 0;
      const std::size_t c0 = box->col0 > grow ? box->col0 - grow : 0;
      add(BinaryMask::rect(scene.height, scene.width, r0, c0, box->row1 + grow, box->col1 + grow),
          gi, ProposalKind::enlarged);
    }
  }

  for (std::size_t k = 0; k < recipe.background_count; ++k) {
    bool emitted = false;
    for (std::size_t attempt = 0; attempt < recipe.max_attempts * 4; ++attempt) {
      const std::size_t side_h = 4 + rng.below(7);
      const std::size_t side_w = 4 + rng.below(7);
      if (side_h >= scene.height || side_w >= scene.width) continue;
      const std::size_t r0 = rng.below(scene.height - side_h);
      const std::size_t c0 = rng.below(scene.width - side_w);
      BinaryMask bg = BinaryMask::rect(scene.height, scene.width, r0, c0, r0 + side_h - 1,
                                       c0 + side_w - 1);
      bool touches = false;
      for (const GtInstance& g : scene.instances) {
        if (intersection_area(bg, g.mask) > 0) {
          touches = true;
          break;
        }
      }
      if (!touches) {
        add(std::move(bg), std::nullopt, ProposalKind::background);
        emitted = true;
        break;
      }
    }
    if (!emitted) out.warnings.push_back("background proposal dropped: no free space");
  }

  // Construction guarantees.
  for (std::size_t gi = 0; gi < scene.instances.size(); ++gi) {
    bool has_full = false, has_fragment = recipe.fragments == 0;
    for (std::size_t i = 0; i < out.masks.size(); ++i) {
      if (out.provenance[i].instance != gi) continue;
      const double v = iou(out.masks[i], scene.instances[gi].mask);
      if (out.provenance[i].kind == ProposalKind::full && v > 0.8) has_full = true;
      if (out.provenance[i].kind == ProposalKind::fragment && v < 0.5) has_fragment = true;
    }
    if (!has_full || !has_fragment) {
      throw ConfigError("generate_proposals: instance " + std::to_string(gi) +
                        " cannot satisfy the construction guarantees");
    }
  }
  return out;
}

// One peak per instance, placed at an interior pixel of the instance's first
// fragment (or the instance itself when no fragment exists). Peak score grows
// with instance area so larger instances rank first.
inline std::vector<PeakCue> generate_peaks(const Scene& scene, const GeneratedProposals& props) {
  auto interior_pixel = [](const BinaryMask& m) {
    const auto box = m.bbox();
    const double cr = (static_cast<double>(box->row0) + static_cast<double>(box->row1)) / 2.0;
    const double cc = (static_cast<double>(box->col0) + static_cast<double>(box->col1)) / 2.0;
    std::size_t best_r = box->row0, best_c = box->col0;
    double best_d = std::numeric_limits<double>::infinity();
    for (const Run& run : m.runs()) {
      for (std::uint32_t p = run.start; p < run.start + run.length; ++p) {
        const double dr = static_cast<double>(p / m.width()) - cr;
        const double dc = static_cast<double>(p % m.width()) - cc;
        const double d = dr * dr + dc * dc;
        if (d < best_d) {
          best_d = d;
          best_r = p / m.width();
          best_c = p % m.width();
        }
      }
    }
    return std::pair<std::size_t, std::size_t>{best_r, best_c};
  };

  std::vector<PeakCue> peaks;
  const double canvas = static_cast<double>(scene.height * scene.width);
  for (std::size_t gi = 0; gi < scene.instances.size(); ++gi) {
    const BinaryMask* anchor = &scene.instances[gi].mask;
    for (std::size_t i = 0; i < props.masks.size(); ++i) {
      if (props.provenance[i].instance == gi &&
          props.provenance[i].kind == ProposalKind::fragment) {
        anchor = &props.masks[i];
        break;
      }
    }
    const auto [r, c] = interior_pixel(*anchor);
    peaks.push_back({scene.instances[gi].category,
                     static_cast<double>(scene.instances[gi].mask.area()) / canvas, r, c});
  }
  return peaks;
}

struct ScorerConfig {
  double eta = 0.5;    // update step toward assigned targets
  double noise = 0.05; // uniform score noise amplitude

  void validate() const {
    if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta must be in [0, 1]");
    if (noise < 0.0) throw ConfigError("noise must be >= 0");
  }
};

// Stand-in for the network heads: holds the current classification and
// integrity tables and nudges them toward assigned targets.
struct SurrogateScorer {
  ScoreTable y;  // classification
  ScoreTable t;  // integrity
  double eta = 0.5;
};

// Initial tables emulating the redundant-segmentation failure mode:
// fragments (precise but incomplete proposals) start with the highest
// classification scores, while integrity starts as noisy IoU-to-instance.
inline SurrogateScorer make_surrogate_scorer(const Scene& scene, const MaskSet& proposals,
                                             const ScorerConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed(seed, "scorer"));
  const std::size_t n = proposals.size();
  const std::size_t cats = scene.num_categories;

  SurrogateScorer s;
  s.eta = cfg.eta;
  s.y = {Matrix(n, cats + 1, 0.0), ScoreKind::classification};
  s.t = {Matrix(n, cats + 1, 0.0), ScoreKind::integrity};

  auto jitter = [&]() { return (rng.unit() * 2.0 - 1.0) * cfg.noise; };
  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };

  for (std::size_t i = 0; i < n; ++i) {
    double best_precision = 0.0;  // fraction of the proposal inside some instance
    double best_overlap = 0.0;    // best IoU to any instance
    std::vector<double> cls(cats + 1, 0.0), integ(cats + 1, 0.0);
    for (const GtInstance& g : scene.instances) {
      const std::size_t inter = intersection_area(proposals[i], g.mask);
      const double precision =
          proposals[i].empty() ? 0.0
                               : static_cast<double>(inter) / static_cast<double>(proposals[i].area());
      const double overlap = iou(proposals[i], g.mask);
      best_precision = std::max(best_precision, precision);
      best_overlap = std::max(best_overlap, overlap);
      // Precise-but-incomplete proposals score highest on classification.
      cls[g.category] = std::max(cls[g.category], precision * (0.35 + 0.55 * (1.0 - overlap)));
      integ[g.category] = std::max(integ[g.category], overlap);
    }
    for (std::size_t c = 1; c <= cats; ++c) {
      s.y.values.at(i, c) = clamp01(cls[c] + jitter());
      s.t.values.at(i, c) = clamp01(integ[c] + jitter());
    }
    s.y.values.at(i, 0) = clamp01(1.0 - best_precision + jitter());
    s.t.values.at(i, 0) = clamp01(1.0 - best_overlap + jitter());
  }
  return s;
}

// Moves each labeled proposal's score rows toward its targets at rate
// eta * w_i; unlabeled proposals are untouched.
inline SurrogateScorer surrogate_update(SurrogateScorer scorer, const RefinedLabels& labels) {
  const std::size_t n = scorer.y.values.rows();
  const std::size_t cols = scorer.y.values.cols();
  if (labels.y_hat.rows() != n || labels.y_hat.cols() != cols) {
    throw std::invalid_argument("surrogate_update: label shape mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    bool labeled = false;
    for (std::size_t c = 0; c < cols && !labeled; ++c) labeled = labels.y_hat.at(i, c) != 0.0;
    if (!labeled) continue;
    const double step = std::clamp(scorer.eta * labels.w[i], 0.0, 1.0);
    for (std::size_t c = 0; c < cols; ++c) {
      const double y = scorer.y.values.at(i, c);
      const double t = scorer.t.values.at(i, c);
      scorer.y.values.at(i, c) = std::clamp((1.0 - step) * y + step * labels.y_hat.at(i, c), 0.0, 1.0);
      scorer.t.values.at(i, c) = std::clamp((1.0 - step) * t + step * labels.t_hat.at(i, c), 0.0, 1.0);
    }
  }
  return scorer;
}

// Warm-up pull toward the pre-computed labels. Only the classification table
// moves: the integrity head has no direct supervision at this stage, which is
// what lets it filter noise out of the pre-computed labels. The cluster term
// of the anti-noise objective is what this step emulates.
inline SurrogateScorer surrogate_warmup(SurrogateScorer scorer, const RefinedLabels& labels) {
  const std::size_t n = scorer.y.values.rows();
  const std::size_t cols = scorer.y.values.cols();
  if (labels.y_hat.rows() != n || labels.y_hat.cols() != cols) {
    throw std::invalid_argument("surrogate_warmup: label shape mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    bool labeled = false;
    for (std::size_t c = 0; c < cols && !labeled; ++c) labeled = labels.y_hat.at(i, c) != 0.0;
    if (!labeled) continue;
    const double step = std::clamp(scorer.eta * labels.w[i], 0.0, 1.0);
    for (std::size_t c = 0; c < cols; ++c) {
      const double y = scorer.y.values.at(i, c);
      scorer.y.values.at(i, c) = std::clamp((1.0 - step) * y + step * labels.y_hat.at(i, c), 0.0, 1.0);
    }
  }
  return scorer;
}

struct RefinementConfig {
  CimConfig cim;
  ScorerConfig scorer;
  double alpha = 12.0;
  bool sample = true;
  ImageScoreMode image_score_mode = ImageScoreMode::clamp;

  void validate() const {
    cim.validate();
    scorer.validate();
    if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
  }
};

// Everything recorded for one branch of a refinement run. Branch 0 is the
// warm-up branch driven by the pre-computed labels; branches 1..K are mining
// branches. The mined (pre-sampling) pseudo ground truth is recorded.
struct BranchRecord {
  std::size_t branch = 0;
  SeedSelection seeds;
  PseudoGroundTruth gt;        // mined, before any sampling
  bool sampled = false;
  PseudoGroundTruth sampled_gt;  // multiset used for labels when sampled
  RefinedLabels labels;
  RefinementLossBreakdown ref_loss;  // branches >= 1
  double seed_mean_iou = 0.0;        // mean best-IoU of seeds against instances
  double gt_mean_iou = 0.0;          // same for mined pseudo ground truth
};

struct RunResult {
  std::vector<SupportMask> supports;
  PrecomputedLabels agpl;
  ProposalClusterSet clusters;
  std::vector<BranchRecord> branches;
  LossReport loss;
  Matrix final_scores;  // N×(C+1) product-of-scores fusion averaged over branches
};

namespace detail {

// Mean over the given proposals of their best IoU against same-category instances.
inline double mean_best_iou(const std::vector<std::pair<std::size_t, std::size_t>>& picks,
                            const MaskSet& proposals, const Scene& scene) {
  if (picks.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [idx, cat] : picks) {
    double best = 0.0;
    for (const GtInstance& g : scene.instances) {
      if (g.category == cat) best = std::max(best, iou(proposals[idx], g.mask));
    }
    total += best;
  }
  return total / static_cast<double>(picks.size());
}

inline RefinedLabels labels_from_precomputed(const PrecomputedLabels& pre) {
  RefinedLabels out;
  out.y_hat = pre.y_hat0;
  out.t_hat = Matrix(pre.y_hat0.rows(), pre.y_hat0.cols(), 0.0);  // no integrity targets
  out.w.assign(pre.proposals(), 0.0);
  for (std::size_t i = 0; i < pre.proposals(); ++i) {
    const auto label = pre.label_of(i);
    if (!label) continue;
    out.w[i] = 1.0;
    if (*label == 0) ++out.bg_count;
    else ++out.fg_count;
  }
  return out;
}

}  // namespace detail

// The full surrogate refinement loop: AGPL warm-up (branch 0), then K mining
// branches, each supervised by labels mined from the preceding branch's
// output, optionally with anti-noise sampling. Final scores fuse the
// per-branch products of classification and integrity tables.
inline RunResult run_refinement(const Scene& scene, const MaskSet& proposals,
                                const std::vector<PeakCue>& peaks, const RefinementConfig& cfg,
                                std::uint64_t seed) {
  cfg.validate();
  const ImageLabel label = scene.image_label();
  const std::size_t n = proposals.size();
  const std::size_t cats = scene.num_categories;

  RunResult run;
  run.supports = compute_support_masks(proposals, peaks);
  run.agpl = assign_precomputed_labels(proposals, run.supports, cats);
  run.clusters = build_clusters(run.agpl);

  SurrogateScorer scorer = make_surrogate_scorer(scene, proposals, cfg.scorer, seed);
  WeightedSampler sampler(derive_seed(seed, "sampler"));

  BranchRecord warmup;
  warmup.branch = 0;
  warmup.seeds.by_category.assign(cats + 1, {});
  warmup.gt.per_category.assign(cats + 1, {});
  warmup.labels = detail::labels_from_precomputed(run.agpl);
  scorer = surrogate_warmup(std::move(scorer), warmup.labels);
  run.loss.anti = anti_noise_loss(scorer.y, scorer.t, label, run.clusters, cfg.alpha,
                                  cfg.image_score_mode);
  run.branches.push_back(std::move(warmup));

  run.final_scores = Matrix(n, cats + 1, 0.0);
  for (std::size_t k = 1; k <= cfg.cim.branch_count; ++k) {
    BranchRecord rec;
    rec.branch = k;
    const ScoreTable y_prev = scorer.y;
    const ScoreTable t_prev = scorer.t;
    rec.seeds = select_seeds(y_prev, proposals, label, cfg.cim);
    rec.gt = mine_pseudo_gt(rec.seeds, t_prev, proposals, cfg.cim);
    if (cfg.sample) {
      rec.sampled = true;
      rec.sampled_gt = anti_noise_sample(rec.gt, y_prev, t_prev, sampler);
    }
    const PseudoGroundTruth& used = cfg.sample ? rec.sampled_gt : rec.gt;
    rec.labels = assign_refined_labels(used, proposals, y_prev, t_prev, k, cfg.cim);
    scorer = surrogate_update(std::move(scorer), rec.labels);
    rec.ref_loss = refinement_loss(scorer.y, scorer.t, rec.labels);
    run.loss.ref.push_back(rec.ref_loss);

    std::vector<std::pair<std::size_t, std::size_t>> seed_picks, gt_picks;
    for (std::size_t c = 1; c <= cats; ++c) {
      for (std::size_t i : rec.seeds.by_category[c]) seed_picks.emplace_back(i, c);
      for (const GtEntry& e : rec.gt.per_category[c]) gt_picks.emplace_back(e.proposal, c);
    }
    rec.seed_mean_iou = detail::mean_best_iou(seed_picks, proposals, scene);
    rec.gt_mean_iou = detail::mean_best_iou(gt_picks, proposals, scene);

    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c <= cats; ++c) {
        run.final_scores.at(i, c) += scorer.y.values.at(i, c) * scorer.t.values.at(i, c);
      }
    }
    run.branches.push_back(std::move(rec));
  }

  const double branches = static_cast<double>(cfg.cim.branch_count);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c <= cats; ++c) run.final_scores.at(i, c) /= branches;
  }
  return run;
}

}  // namespace cim

#include <catch2/catch.hpp>

#include "cim/mining.hpp"
#include "cim/rng.hpp"
#include "oracles.hpp"

using cim::BinaryMask;
using cim::CimConfig;
using cim::ImageLabel;
using cim::MaskSet;
using cim::ScoreKind;
using cim::ScoreTable;

namespace {

BinaryMask row_mask(std::size_t h, std::size_t w, std::uint32_t start, std::uint32_t len) {
  return BinaryMask::from_runs(h, w, {{start, len}});
}

ScoreTable table(ScoreKind kind, std::size_t n, std::size_t cats,
                 const std::vector<std::tuple<std::size_t, std::size_t, double>>& entries) {
  ScoreTable t{cim::Matrix(n, cats + 1, 0.0), kind};
  for (const auto& [i, c, v] : entries) t.values.at(i, c) = v;
  return t;
}

// Random instance shared by the oracle-equivalence property tests. Scores are
// quantized half the time so ties are frequent and the tie-break rules bite.
struct RandomInstance {
  MaskSet proposals{0, 0};
  std::vector<oracle::Grid> grids;
  ScoreTable y, t;
  ImageLabel label;
  CimConfig cfg;
};

RandomInstance random_instance(cim::Rng& rng, std::size_t max_n = 20, std::size_t max_cats = 3) {
  RandomInstance inst;
  const std::size_t n = 1 + rng.below(max_n);
  const std::size_t cats = 1 + rng.below(max_cats);
  const std::size_t h = 8 + rng.below(9), w = 8 + rng.below(9);
  inst.proposals = MaskSet(h, w);
  for (std::size_t i = 0; i < n; ++i) {
    inst.proposals.add(oracle::random_mask(rng, h, w));
    inst.grids.push_back(inst.proposals[i].to_dense());
  }
  const bool quantize = rng.below(2) == 0;
  auto score = [&]() {
    const double v = rng.unit();
    return quantize ? std::floor(v * 4.0) / 4.0 : v;
  };
  inst.y = {cim::Matrix(n, cats + 1, 0.0), ScoreKind::classification};
  inst.t = {cim::Matrix(n, cats + 1, 0.0), ScoreKind::integrity};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c <= cats; ++c) {
      inst.y.values.at(i, c) = score();
      inst.t.values.at(i, c) = score();
    }
  }
  inst.label.assign(cats + 1, 0);
  inst.label[0] = 1;
  for (std::size_t c = 1; c <= cats; ++c) inst.label[c] = rng.below(4) != 0 ? 1 : 0;
  inst.cfg = CimConfig{};
  return inst;
}

}  // namespace

TEST_CASE("config defaults and validation") {
  CimConfig cfg;
  REQUIRE(cfg.tau_cls == 0.25);
  REQUIRE(cfg.tau_iou == 0.5);
  REQUIRE(cfg.tau_cas == 0.1);
  REQUIRE(cfg.tau_con == 0.85);
  REQUIRE(cfg.tau_nms == 0.25);
  REQUIRE(cfg.p_seed == 0.1);
  REQUIRE(cfg.branch_count == 3);
  REQUIRE_NOTHROW(cfg.validate());

  cfg.p_seed = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), cim::ConfigError);
  cfg = CimConfig{};
  cfg.tau_cls = 0.6;  // above tau_iou
  REQUIRE_THROWS_AS(cfg.validate(), cim::ConfigError);
}

TEST_CASE("seed keep count is a safe ceiling") {
  REQUIRE(cim::seed_keep_count(0.1, 20) == 2);
  REQUIRE(cim::seed_keep_count(0.1, 25) == 3);
  REQUIRE(cim::seed_keep_count(0.1, 5) == 1);
  REQUIRE(cim::seed_keep_count(0.01, 3) == 1);
  REQUIRE(cim::seed_keep_count(1.0, 7) == 7);
  REQUIRE(cim::seed_keep_count(0.5, 8) == 4);
}

TEST_CASE("single proposal becomes the seed of every present category") {
  MaskSet proposals(4, 4, {row_mask(4, 4, 0, 8)});
  const auto y = table(ScoreKind::classification, 1, 2, {{0, 1, 0.4}, {0, 2, 0.2}});
  const ImageLabel label{1, 1, 0};
  const auto seeds = cim::select_seeds(y, proposals, label, CimConfig{});
  REQUIRE(seeds.by_category[1] == std::vector<std::size_t>{0});
  REQUIRE(seeds.by_category[2].empty());
}

TEST_CASE("absent categories produce no seeds") {
  MaskSet proposals(4, 4, {row_mask(4, 4, 0, 8), row_mask(4, 4, 8, 4)});
  const auto y = table(ScoreKind::classification, 2, 2, {{0, 1, 0.9}, {1, 2, 0.8}});
  const ImageLabel label{1, 0, 0};
  REQUIRE(cim::select_seeds(y, proposals, label, CimConfig{}).total() == 0);
}

TEST_CASE("select_seeds matches the brute-force oracle") {
  cim::Rng rng(101);
  for (int trial = 0; trial < 60; ++trial) {
    const RandomInstance inst = random_instance(rng);
    const auto got = cim::select_seeds(inst.y, inst.proposals, inst.label, inst.cfg);
    const auto want = oracle::brute_select_seeds(inst.y, inst.grids, inst.label, inst.cfg);
    REQUIRE(got.by_category == want);
  }
}

TEST_CASE("lone seed mines itself when nothing contains it") {
  MaskSet proposals(4, 4, {row_mask(4, 4, 0, 8), row_mask(4, 4, 12, 4)});
  cim::SeedSelection seeds;
  seeds.by_category.assign(2, {});
  seeds.by_category[1] = {0};
  const auto t = table(ScoreKind::integrity, 2, 1, {{0, 1, 0.1}, {1, 1, 0.9}});
  const auto gt = cim::mine_pseudo_gt(seeds, t, proposals, CimConfig{});
  REQUIRE(gt.per_category[1].size() == 1);
  REQUIRE(gt.per_category[1][0].proposal == 0);
  REQUIRE(gt.per_category[1][0].seed == 0);
}

TEST_CASE("seed pulls in its highest-integrity container") {
  // R1 is the 8-pixel complete mask; R2 its 4-pixel top half with higher
  // classification but lower integrity. Containment of R2 in R1 is 1.
  MaskSet proposals(4, 4, {row_mask(4, 4, 0, 8), row_mask(4, 4, 0, 4)});
  cim::SeedSelection seeds;
  seeds.by_category.assign(2, {});
  seeds.by_category[1] = {1};  // R2 selected as seed
  const auto t = table(ScoreKind::integrity, 2, 1, {{0, 1, 0.9}, {1, 1, 0.4}});
  const auto gt = cim::mine_pseudo_gt(seeds, t, proposals, CimConfig{});
  REQUIRE(gt.per_category[1].size() == 1);
  REQUIRE(gt.per_category[1][0].proposal == 0);
  REQUIRE(gt.per_category[1][0].seed == 1);
}

TEST_CASE("mine_pseudo_gt matches the exhaustive per-seed oracle") {
  cim::Rng rng(202);
  for (int trial = 0; trial < 60; ++trial) {
    const RandomInstance inst = random_instance(rng, 15);
    const auto seeds = cim::select_seeds(inst.y, inst.proposals, inst.label, inst.cfg);
    const auto got = cim::mine_pseudo_gt(seeds, inst.t, inst.proposals, inst.cfg);
    const auto want = oracle::brute_mine(seeds.by_category, inst.t, inst.grids, inst.cfg);
    REQUIRE(got.per_category == want);
  }
}

TEST_CASE("mined pseudo ground truth always contains its seed") {
  cim::Rng rng(303);
  for (int trial = 0; trial < 40; ++trial) {
    const RandomInstance inst = random_instance(rng);
    const auto seeds = cim::select_seeds(inst.y, inst.proposals, inst.label, inst.cfg);
    const auto gt = cim::mine_pseudo_gt(seeds, inst.t, inst.proposals, inst.cfg);
    for (std::size_t c = 1; c < gt.per_category.size(); ++c) {
      // Every non-empty seed yields a candidate (it contains itself).
      std::size_t expected = 0;
      std::vector<std::size_t> mined;
      for (std::size_t s : seeds.by_category[c]) {
        if (!inst.proposals[s].empty()) ++expected;
      }
      for (const cim::GtEntry& e : gt.per_category[c]) {
        mined.push_back(e.proposal);
        const double containment =
            static_cast<double>(intersection_area(inst.proposals[e.proposal],
                                                  inst.proposals[e.seed])) /
            static_cast<double>(inst.proposals[e.seed].area());
        REQUIRE(containment > inst.cfg.tau_con);
      }
      // Dedup can only shrink the list; each distinct pick appears once.
      std::sort(mined.begin(), mined.end());
      REQUIRE(std::adjacent_find(mined.begin(), mined.end()) == mined.end());
      REQUIRE(gt.per_category[c].size() <= std::max(expected, std::size_t{1}));
    }
  }
}

TEST_CASE("monotone scaling invariance of seeds and mining") {
  cim::Rng rng(404);
  for (int trial = 0; trial < 25; ++trial) {
    const RandomInstance inst = random_instance(rng);
    ScoreTable y_scaled = inst.y;
    ScoreTable t_scaled = inst.t;
    const double factor = 0.25 + rng.unit() * 3.0;
    for (std::size_t i = 0; i < y_scaled.values.rows(); ++i) {
      for (std::size_t c = 0; c < y_scaled.values.cols(); ++c) {
        y_scaled.values.at(i, c) *= factor;
        t_scaled.values.at(i, c) *= factor;
      }
    }
    const auto seeds = cim::select_seeds(inst.y, inst.proposals, inst.label, inst.cfg);
    const auto seeds_scaled = cim::select_seeds(y_scaled, inst.proposals, inst.label, inst.cfg);
    REQUIRE(seeds.by_category == seeds_scaled.by_category);
    const auto gt = cim::mine_pseudo_gt(seeds, inst.t, inst.proposals, inst.cfg);
    const auto gt_scaled = cim::mine_pseudo_gt(seeds, t_scaled, inst.proposals, inst.cfg);
    REQUIRE(gt.per_category == gt_scaled.per_category);
  }
}

TEST_CASE("effective thresholds follow the cascade") {
  REQUIRE(cim::effective_threshold(0.25, 1, 0.1) == 0.25);
  REQUIRE(cim::effective_threshold(0.25, 2, 0.1) == Approx(0.35).margin(1e-12));
  REQUIRE(cim::effective_threshold(0.5, 2, 0.1) == Approx(0.6).margin(1e-12));
  REQUIRE(cim::effective_threshold(0.5, 3, 0.1) == Approx(0.7).margin(1e-12));
}

TEST_CASE("refined labels on the boundary fixture") {
  // Proposal 1 has IoU exactly 0.5 with the only pseudo-GT mask: the strict
  // inequality labels it on classification but not on integrity.
  MaskSet proposals(4, 4, {row_mask(4, 4, 0, 10), row_mask(4, 4, 0, 5)});
  cim::PseudoGroundTruth gt;
  gt.per_category.assign(2, {});
  gt.per_category[1] = {{0, 0}};
  const auto y = table(ScoreKind::classification, 2, 1, {{0, 1, 0.8}});
  const auto t = table(ScoreKind::integrity, 2, 1, {{0, 1, 0.9}});

  const auto labels = cim::assign_refined_labels(gt, proposals, y, t, 1, CimConfig{});
  REQUIRE(iou(proposals[1], proposals[0]) == 0.5);
  REQUIRE(labels.y_hat.at(1, 1) == 1.0);
  REQUIRE(labels.t_hat.at(1, 1) == 0.0);
  REQUIRE(labels.w[1] == 0.8 * 0.9);  // exact product of the GT scores

  // The GT proposal itself: IoU 1 -> both targets set.
  REQUIRE(labels.y_hat.at(0, 1) == 1.0);
  REQUIRE(labels.t_hat.at(0, 1) == 1.0);
  REQUIRE(labels.w[0] == 0.8 * 0.9);
  REQUIRE(labels.fg_count == 2);
  REQUIRE(labels.bg_count == 0);
}

TEST_CASE("cascaded thresholds at branch 2 use 0.35 and 0.6") {
  MaskSet proposals(4, 4, {
                              BinaryMask::from_runs(4, 4, {{0, 10}}),  // pseudo GT, IoU 1
                              BinaryMask::from_runs(4, 4, {{0, 5}}),   // IoU 0.5
                              BinaryMask::from_runs(4, 4, {{0, 3}}),   // IoU 0.3
                          });
  cim::PseudoGroundTruth gt;
  gt.per_category.assign(2, {});
  gt.per_category[1] = {{0, 0}};
  const auto y = table(ScoreKind::classification, 3, 1, {{0, 1, 0.8}});
  const auto t = table(ScoreKind::integrity, 3, 1, {{0, 1, 0.9}});

  const auto k2 = cim::assign_refined_labels(gt, proposals, y, t, 2, CimConfig{});
  REQUIRE(k2.y_hat.at(1, 1) == 1.0);  // 0.5 > 0.35
  REQUIRE(k2.t_hat.at(1, 1) == 0.0);  // 0.5 > 0.6 is false
  REQUIRE(k2.y_hat.at(2, 1) == 0.0);  // 0.3 > 0.35 is false
  REQUIRE(k2.y_hat.at(2, 0) == 1.0);  // overlapping residual -> background
  REQUIRE(k2.t_hat.at(0, 1) == 1.0);  // IoU 1 > 0.6

  const auto k1 = cim::assign_refined_labels(gt, proposals, y, t, 1, CimConfig{});
  REQUIRE(k1.y_hat.at(2, 1) == 1.0);  // 0.3 > 0.25 at branch 1
}

TEST_CASE("proposal disjoint from every pseudo-GT mask stays unlabeled") {
  MaskSet proposals(4, 4, {row_mask(4, 4, 0, 8), row_mask(4, 4, 12, 4)});
  cim::PseudoGroundTruth gt;
  gt.per_category.assign(2, {});
  gt.per_category[1] = {{0, 0}};
  const auto y = table(ScoreKind::classification, 2, 1, {{0, 1, 0.5}});
  const auto t = table(ScoreKind::integrity, 2, 1, {{0, 1, 0.5}});
  const auto labels = cim::assign_refined_labels(gt, proposals, y, t, 1, CimConfig{});
  REQUIRE(labels.y_hat.at(1, 0) == 0.0);
  REQUIRE(labels.y_hat.at(1, 1) == 0.0);
  REQUIRE(labels.w[1] == 0.0);
  REQUIRE(labels.bg_count == 0);
}

TEST_CASE("empty pseudo ground truth labels nothing") {
  MaskSet proposals(4, 4, {row_mask(4, 4, 0, 8)});
  cim::PseudoGroundTruth gt;
  gt.per_category.assign(2, {});
  const auto y = table(ScoreKind::classification, 1, 1, {});
  const auto t = table(ScoreKind::integrity, 1, 1, {});
  const auto labels = cim::assign_refined_labels(gt, proposals, y, t, 1, CimConfig{});
  REQUIRE(labels.fg_count == 0);
  REQUIRE(labels.bg_count == 0);
}

TEST_CASE("one category per proposal unless multi_label is set") {
  // The proposal clears tau_cls against GT entries of both categories, more
  // strongly for category 1; single-label keeps only category 1.
  MaskSet proposals(1, 20, {
                               row_mask(1, 20, 0, 10),  // GT cat 1
                               row_mask(1, 20, 2, 16),  // GT cat 2
                               row_mask(1, 20, 0, 12),
                           });
  cim::PseudoGroundTruth gt;
  gt.per_category.assign(3, {});
  gt.per_category[1] = {{0, 0}};
  gt.per_category[2] = {{1, 1}};
  const auto y = table(ScoreKind::classification, 3, 2, {{0, 1, 0.9}, {1, 2, 0.7}});
  const auto t = table(ScoreKind::integrity, 3, 2, {{0, 1, 0.8}, {1, 2, 0.6}});

  const double iou_cat1 = iou(proposals[2], proposals[0]);
  const double iou_cat2 = iou(proposals[2], proposals[1]);
  REQUIRE(iou_cat1 > iou_cat2);
  REQUIRE(iou_cat2 > 0.25);

  CimConfig cfg;
  const auto single = cim::assign_refined_labels(gt, proposals, y, t, 1, cfg);
  REQUIRE(single.y_hat.at(2, 1) == 1.0);
  REQUIRE(single.y_hat.at(2, 2) == 0.0);
  REQUIRE(single.w[2] == 0.9 * 0.8);

  cfg.multi_label = true;
  const auto multi = cim::assign_refined_labels(gt, proposals, y, t, 1, cfg);
  REQUIRE(multi.y_hat.at(2, 1) == 1.0);
  REQUIRE(multi.y_hat.at(2, 2) == 1.0);
}

TEST_CASE("deeper branches never gain foreground labels") {
  cim::Rng rng(505);
  for (int trial = 0; trial < 25; ++trial) {
    const RandomInstance inst = random_instance(rng);
    const auto seeds = cim::select_seeds(inst.y, inst.proposals, inst.label, inst.cfg);
    const auto gt = cim::mine_pseudo_gt(seeds, inst.t, inst.proposals, inst.cfg);
    std::vector<cim::RefinedLabels> by_branch;
    for (std::size_t k = 1; k <= 3; ++k) {
      by_branch.push_back(
          cim::assign_refined_labels(gt, inst.proposals, inst.y, inst.t, k, inst.cfg));
    }
    for (std::size_t k = 1; k < by_branch.size(); ++k) {
      for (std::size_t i = 0; i < inst.proposals.size(); ++i) {
        for (std::size_t c = 1; c < by_branch[k].y_hat.cols(); ++c) {
          // fg set at branch k+1 implies fg at branch k
          if (by_branch[k].y_hat.at(i, c) == 1.0) {
            REQUIRE(by_branch[k - 1].y_hat.at(i, c) == 1.0);
          }
          // integrity target implies classification target (tau_iou >= tau_cls)
          if (by_branch[k].t_hat.at(i, c) == 1.0) {
            REQUIRE(by_branch[k].y_hat.at(i, c) == 1.0);
          }
        }
      }
    }
  }
}

TEST_CASE("full branch matches the composed brute-force oracle") {
  cim::Rng rng(606);
  for (int trial = 0; trial < 40; ++trial) {
    const RandomInstance inst = random_instance(rng);
    const std::size_t branch_k = 1 + rng.below(3);
    const auto got =
        cim::run_cim_branch(inst.y, inst.t, inst.proposals, inst.label, branch_k, inst.cfg);

    const auto seeds = oracle::brute_select_seeds(inst.y, inst.grids, inst.label, inst.cfg);
    const auto gt = oracle::brute_mine(seeds, inst.t, inst.grids, inst.cfg);
    const auto labels =
        oracle::brute_assign(gt, inst.grids, inst.y, inst.t, branch_k, inst.cfg);

    REQUIRE(got.seeds.by_category == seeds);
    REQUIRE(got.gt.per_category == gt);
    for (std::size_t i = 0; i < inst.proposals.size(); ++i) {
      std::optional<std::size_t> got_cat;
      for (std::size_t c = 0; c < got.labels.y_hat.cols(); ++c) {
        if (got.labels.y_hat.at(i, c) != 0.0) got_cat = c;
      }
      REQUIRE(got_cat == labels.category[i]);
      REQUIRE(got.labels.w[i] == labels.w[i]);
      if (got_cat && *got_cat >= 1) {
        REQUIRE((got.labels.t_hat.at(i, *got_cat) != 0.0) == labels.t_flag[i]);
      }
    }
  }
}

TEST_CASE("absent category contributes nothing to branch labels") {
  MaskSet proposals(4, 4, {row_mask(4, 4, 0, 8), row_mask(4, 4, 8, 8)});
  const auto y = table(ScoreKind::classification, 2, 2, {{0, 1, 0.9}, {1, 2, 0.9}});
  const auto t = table(ScoreKind::integrity, 2, 2, {{0, 1, 0.9}, {1, 2, 0.9}});
  const ImageLabel label{1, 1, 0};  // category 2 absent
  const auto r = cim::run_cim_branch(y, t, proposals, label, 1, CimConfig{});
  REQUIRE(r.seeds.by_category[2].empty());
  REQUIRE(r.gt.per_category[2].empty());
  for (std::size_t i = 0; i < 2; ++i) {
    REQUIRE(r.labels.y_hat.at(i, 2) == 0.0);
    REQUIRE(r.labels.t_hat.at(i, 2) == 0.0);
  }
  // proposal 1 is disjoint from the only category-1 entry: unlabeled
  REQUIRE(r.labels.y_hat.at(1, 0) == 0.0);
  REQUIRE(r.labels.y_hat.at(1, 1) == 0.0);
}

TEST_CASE("degenerate composition: one proposal, one category") {
  MaskSet proposals(4, 4, {row_mask(4, 4, 0, 8)});
  const auto y = table(ScoreKind::classification, 1, 1, {{0, 1, 0.6}});
  const auto t = table(ScoreKind::integrity, 1, 1, {{0, 1, 0.7}});
  const ImageLabel label{1, 1};
  const auto r = cim::run_cim_branch(y, t, proposals, label, 1, CimConfig{});
  REQUIRE(r.gt.per_category[1].size() == 1);
  REQUIRE(r.gt.per_category[1][0].proposal == 0);
  REQUIRE(r.labels.y_hat.at(0, 1) == 1.0);
  REQUIRE(r.labels.t_hat.at(0, 1) == 1.0);
  REQUIRE(r.labels.w[0] == 0.6 * 0.7);
}

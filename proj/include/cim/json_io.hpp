#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cim/agpl.hpp"
#include "cim/errors.hpp"
#include "cim/eval.hpp"
#include "cim/losses.hpp"
#include "cim/mask.hpp"
#include "cim/mining.hpp"
#include "cim/rng.hpp"
#include "cim/synth.hpp"

namespace cim {

using json = nlohmann::json;

inline constexpr std::string_view kLibraryVersion = "0.1.0";

// ---- file helpers ---------------------------------------------------------

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::string digest_bytes(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return std::string("fnv1a64:") + buf;
}

inline std::string file_digest(const std::filesystem::path& path) {
  return digest_bytes(read_text_file(path));
}

// Parses JSON, turning parse failures into ConfigError with file:line:column
// context computed from the byte offset.
inline json parse_json(std::string_view text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min(text.size(), e.byte == 0 ? std::size_t{0} : e.byte - 1);
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": " + e.what());
  }
}

inline json load_json_file(const std::filesystem::path& path) {
  return parse_json(read_text_file(path), path.string());
}

inline void save_json_file(const std::filesystem::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

// ---- schema helpers -------------------------------------------------------

inline const json& require_field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError(where + ": missing field '" + key + "'");
  }
  return j.at(key);
}

inline double require_number(const json& j, const char* key, const std::string& where) {
  const json& v = require_field(j, key, where);
  if (!v.is_number()) throw ConfigError(where + ": field '" + key + "' must be a number");
  return v.get<double>();
}

inline std::size_t require_uint(const json& j, const char* key, const std::string& where) {
  const json& v = require_field(j, key, where);
  if (!v.is_number_unsigned()) {
    throw ConfigError(where + ": field '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

// ---- masks ----------------------------------------------------------------

inline json mask_to_json(const BinaryMask& m) {
  json runs = json::array();
  for (const Run& r : m.runs()) runs.push_back({r.start, r.length});
  return json{{"h", m.height()}, {"w", m.width()}, {"runs", std::move(runs)}};
}

inline BinaryMask mask_from_json(const json& j, const std::string& where = "mask") {
  const std::size_t h = require_uint(j, "h", where);
  const std::size_t w = require_uint(j, "w", where);
  const json& runs = require_field(j, "runs", where);
  if (!runs.is_array()) throw ConfigError(where + ": 'runs' must be an array");
  std::vector<Run> parsed;
  parsed.reserve(runs.size());
  for (const json& r : runs) {
    if (!r.is_array() || r.size() != 2 || !r[0].is_number_unsigned() ||
        !r[1].is_number_unsigned()) {
      throw ConfigError(where + ": each run must be [start, length]");
    }
    parsed.push_back({r[0].get<std::uint32_t>(), r[1].get<std::uint32_t>()});
  }
  try {
    return BinaryMask::from_runs(h, w, std::move(parsed));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline const char* proposal_kind_name(ProposalKind k) {
  switch (k) {
    case ProposalKind::full: return "full";
    case ProposalKind::fragment: return "fragment";
    case ProposalKind::enlarged: return "enlarged";
    case ProposalKind::background: return "background";
  }
  return "background";
}

inline ProposalKind proposal_kind_from_name(const std::string& name, const std::string& where) {
  if (name == "full") return ProposalKind::full;
  if (name == "fragment") return ProposalKind::fragment;
  if (name == "enlarged") return ProposalKind::enlarged;
  if (name == "background") return ProposalKind::background;
  throw ConfigError(where + ": unknown proposal kind '" + name + "'");
}

inline json proposals_to_json(const GeneratedProposals& p) {
  json masks = json::array();
  for (const BinaryMask& m : p.masks.masks()) masks.push_back(mask_to_json(m));
  json prov = json::array();
  for (const ProposalProvenance& pp : p.provenance) {
    json e{{"kind", proposal_kind_name(pp.kind)}};
    if (pp.instance) e["instance"] = *pp.instance;
    prov.push_back(std::move(e));
  }
  return json{{"h", p.masks.height()},
              {"w", p.masks.width()},
              {"masks", std::move(masks)},
              {"provenance", std::move(prov)}};
}

inline GeneratedProposals proposals_from_json(const json& j, const std::string& where = "proposals") {
  const std::size_t h = require_uint(j, "h", where);
  const std::size_t w = require_uint(j, "w", where);
  const json& masks = require_field(j, "masks", where);
  if (!masks.is_array()) throw ConfigError(where + ": 'masks' must be an array");
  GeneratedProposals out{MaskSet(h, w), {}, {}};
  for (std::size_t i = 0; i < masks.size(); ++i) {
    out.masks.add(mask_from_json(masks[i], where + ".masks[" + std::to_string(i) + "]"));
  }
  if (j.contains("provenance")) {
    const json& prov = j.at("provenance");
    if (!prov.is_array() || prov.size() != masks.size()) {
      throw ConfigError(where + ": provenance must parallel masks");
    }
    for (std::size_t i = 0; i < prov.size(); ++i) {
      ProposalProvenance pp;
      pp.kind = proposal_kind_from_name(
          require_field(prov[i], "kind", where).get<std::string>(), where);
      if (prov[i].contains("instance")) pp.instance = prov[i].at("instance").get<std::size_t>();
      out.provenance.push_back(pp);
    }
  }
  return out;
}

// ---- scenes and peaks -----------------------------------------------------

inline json scene_to_json(const Scene& s) {
  json instances = json::array();
  for (const GtInstance& g : s.instances) {
    instances.push_back({{"mask", mask_to_json(g.mask)}, {"cat", g.category}});
  }
  return json{{"h", s.height},
              {"w", s.width},
              {"num_categories", s.num_categories},
              {"instances", std::move(instances)}};
}

inline Scene scene_from_json(const json& j, const std::string& where = "scene") {
  Scene s;
  s.height = require_uint(j, "h", where);
  s.width = require_uint(j, "w", where);
  s.num_categories = require_uint(j, "num_categories", where);
  const json& instances = require_field(j, "instances", where);
  if (!instances.is_array()) throw ConfigError(where + ": 'instances' must be an array");
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const std::string iw = where + ".instances[" + std::to_string(i) + "]";
    GtInstance g;
    g.mask = mask_from_json(require_field(instances[i], "mask", iw), iw + ".mask");
    g.category = require_uint(instances[i], "cat", iw);
    if (g.category == 0 || g.category > s.num_categories) {
      throw ConfigError(iw + ": category out of range");
    }
    if (g.mask.height() != s.height || g.mask.width() != s.width) {
      throw ConfigError(iw + ": canvas mismatch");
    }
    if (g.mask.empty()) throw ConfigError(iw + ": instance mask is empty");
    s.instances.push_back(std::move(g));
  }
  return s;
}

inline json peaks_to_json(const std::vector<PeakCue>& peaks) {
  json arr = json::array();
  for (const PeakCue& p : peaks) {
    arr.push_back({{"cat", p.category}, {"score", p.score}, {"px", {p.row, p.col}}});
  }
  return arr;
}

inline std::vector<PeakCue> peaks_from_json(const json& j, const std::string& where = "peaks") {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of peaks");
  std::vector<PeakCue> peaks;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string iw = where + "[" + std::to_string(i) + "]";
    PeakCue p;
    p.category = require_uint(j[i], "cat", iw);
    if (p.category == 0) throw ConfigError(iw + ": peak category must be >= 1");
    p.score = require_number(j[i], "score", iw);
    const json& px = require_field(j[i], "px", iw);
    if (!px.is_array() || px.size() != 2) throw ConfigError(iw + ": 'px' must be [row, col]");
    p.row = px[0].get<std::size_t>();
    p.col = px[1].get<std::size_t>();
    peaks.push_back(p);
  }
  return peaks;
}

// ---- labels, clusters, pseudo ground truth --------------------------------

inline json precomputed_labels_to_json(const PrecomputedLabels& labels,
                                       const std::vector<SupportMask>& supports) {
  json assignments = json::array();
  for (std::size_t i = 0; i < labels.proposals(); ++i) {
    if (const auto cat = labels.label_of(i)) assignments.push_back({i, *cat});
  }
  json assigned = json::array();
  for (std::size_t i = 0; i < labels.proposals(); ++i) {
    if (labels.assigned_support[i]) assigned.push_back({i, *labels.assigned_support[i]});
  }
  json sup = json::array();
  for (const SupportMask& s : supports) {
    sup.push_back({{"mask", mask_to_json(s.mask)},
                   {"cat", s.category},
                   {"peak_score", s.peak_score},
                   {"supporter_count", s.supporter_count}});
  }
  json clusters = json::array();
  for (const ProposalCluster& c : build_clusters(labels).clusters) {
    clusters.push_back({{"members", c.members}, {"cat", c.category}});
  }
  return json{{"proposals", labels.proposals()},
              {"num_categories", labels.categories()},
              {"assignments", std::move(assignments)},
              {"assigned_support", std::move(assigned)},
              {"supports", std::move(sup)},
              {"clusters", std::move(clusters)}};
}

inline json pseudo_gt_to_json(const PseudoGroundTruth& gt) {
  json arr = json::array();
  for (std::size_t c = 1; c < gt.per_category.size(); ++c) {
    for (const GtEntry& e : gt.per_category[c]) {
      arr.push_back({{"cat", c}, {"proposal", e.proposal}, {"seed", e.seed}});
    }
  }
  return arr;
}

inline json refined_labels_to_json(const RefinedLabels& labels) {
  json rows = json::array();
  const std::size_t cols = labels.y_hat.cols();
  for (std::size_t i = 0; i < labels.y_hat.rows(); ++i) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (labels.y_hat.at(i, c) == 0.0) continue;
      rows.push_back({{"proposal", i},
                      {"cat", c},
                      {"t_hat", labels.t_hat.at(i, c) != 0.0},
                      {"w", labels.w[i]}});
    }
  }
  return json{{"fg", labels.fg_count}, {"bg", labels.bg_count}, {"rows", std::move(rows)}};
}

// ---- losses ----------------------------------------------------------------

inline json loss_report_to_json(const LossReport& report) {
  json ref = json::array();
  for (const RefinementLossBreakdown& r : report.ref) {
    ref.push_back({{"classification", r.classification},
                   {"integrity", r.integrity},
                   {"total", r.total}});
  }
  return json{{"l_ref", std::move(ref)},
              {"l_anti", {{"bce", report.anti.bce}, {"pcl", report.anti.pcl},
                          {"total", report.anti.total}}},
              {"l_total", report.total()}};
}

// ---- configs ---------------------------------------------------------------

// Flat pipeline configuration: mining thresholds plus scene, proposal-recipe,
// scorer, and loss knobs, all overridable from one key-value JSON object.
struct PipelineConfig {
  SceneConfig scene;
  ProposalRecipe recipe;
  CimConfig cim;
  ScorerConfig scorer;
  double alpha = 12.0;
  bool sample = true;
  ImageScoreMode image_score_mode = ImageScoreMode::clamp;

  RefinementConfig refinement() const {
    return RefinementConfig{cim, scorer, alpha, sample, image_score_mode};
  }

  void validate() const {
    scene.validate();
    recipe.validate();
    refinement().validate();
  }
};

inline json pipeline_config_to_json(const PipelineConfig& p) {
  return json{
      {"height", p.scene.height},
      {"width", p.scene.width},
      {"num_categories", p.scene.num_categories},
      {"num_instances", p.scene.num_instances},
      {"min_side", p.scene.min_side},
      {"max_side", p.scene.max_side},
      {"compound_prob", p.scene.compound_prob},
      {"place_attempts", p.scene.max_attempts},
      {"full_copies", p.recipe.full_copies},
      {"fragments", p.recipe.fragments},
      {"enlarged", p.recipe.enlarged},
      {"background_count", p.recipe.background_count},
      {"jitter_px", p.recipe.jitter_px},
      {"fragment_min_frac", p.recipe.fragment_min_frac},
      {"fragment_max_frac", p.recipe.fragment_max_frac},
      {"proposal_attempts", p.recipe.max_attempts},
      {"tau_cls", p.cim.tau_cls},
      {"tau_iou", p.cim.tau_iou},
      {"tau_cas", p.cim.tau_cas},
      {"tau_con", p.cim.tau_con},
      {"tau_nms", p.cim.tau_nms},
      {"p_seed", p.cim.p_seed},
      {"branch_count", p.cim.branch_count},
      {"nms_on_boxes", p.cim.nms_on_boxes},
      {"multi_label", p.cim.multi_label},
      {"eta", p.scorer.eta},
      {"noise", p.scorer.noise},
      {"alpha", p.alpha},
      {"sample", p.sample},
      {"image_score_mode", p.image_score_mode == ImageScoreMode::softmax ? "softmax" : "clamp"},
  };
}

inline PipelineConfig pipeline_config_from_json(const json& j,
                                                const std::string& where = "config") {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  PipelineConfig p;

  auto num = [&](const char* key, double& slot) {
    if (!j.contains(key)) return false;
    if (!j.at(key).is_number()) throw ConfigError(where + ": '" + key + "' must be a number");
    slot = j.at(key).get<double>();
    return true;
  };
  auto uint_ = [&](const char* key, std::size_t& slot) {
    if (!j.contains(key)) return false;
    if (!j.at(key).is_number_unsigned()) {
      throw ConfigError(where + ": '" + key + "' must be a non-negative integer");
    }
    slot = j.at(key).get<std::size_t>();
    return true;
  };
  auto flag = [&](const char* key, bool& slot) {
    if (!j.contains(key)) return false;
    if (!j.at(key).is_boolean()) throw ConfigError(where + ": '" + key + "' must be a boolean");
    slot = j.at(key).get<bool>();
    return true;
  };

  static const std::vector<std::string> known{
      "height", "width", "num_categories", "num_instances", "min_side", "max_side",
      "compound_prob", "place_attempts", "full_copies", "fragments", "enlarged",
      "background_count", "jitter_px", "fragment_min_frac", "fragment_max_frac",
      "proposal_attempts", "tau_cls", "tau_iou", "tau_cas", "tau_con", "tau_nms",
      "p_seed", "branch_count", "nms_on_boxes", "multi_label", "eta", "noise", "alpha",
      "sample", "image_score_mode"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
  }

  uint_("height", p.scene.height);
  uint_("width", p.scene.width);
  uint_("num_categories", p.scene.num_categories);
  uint_("num_instances", p.scene.num_instances);
  uint_("min_side", p.scene.min_side);
  uint_("max_side", p.scene.max_side);
  num("compound_prob", p.scene.compound_prob);
  uint_("place_attempts", p.scene.max_attempts);
  uint_("full_copies", p.recipe.full_copies);
  uint_("fragments", p.recipe.fragments);
  uint_("enlarged", p.recipe.enlarged);
  uint_("background_count", p.recipe.background_count);
  uint_("jitter_px", p.recipe.jitter_px);
  num("fragment_min_frac", p.recipe.fragment_min_frac);
  num("fragment_max_frac", p.recipe.fragment_max_frac);
  uint_("proposal_attempts", p.recipe.max_attempts);
  num("tau_cls", p.cim.tau_cls);
  num("tau_iou", p.cim.tau_iou);
  num("tau_cas", p.cim.tau_cas);
  num("tau_con", p.cim.tau_con);
  num("tau_nms", p.cim.tau_nms);
  num("p_seed", p.cim.p_seed);
  uint_("branch_count", p.cim.branch_count);
  flag("nms_on_boxes", p.cim.nms_on_boxes);
  flag("multi_label", p.cim.multi_label);
  num("eta", p.scorer.eta);
  num("noise", p.scorer.noise);
  num("alpha", p.alpha);
  flag("sample", p.sample);
  if (j.contains("image_score_mode")) {
    const std::string mode = j.at("image_score_mode").get<std::string>();
    if (mode == "clamp") p.image_score_mode = ImageScoreMode::clamp;
    else if (mode == "softmax") p.image_score_mode = ImageScoreMode::softmax;
    else throw ConfigError(where + ": image_score_mode must be 'clamp' or 'softmax'");
  }
  p.validate();
  return p;
}

// ---- predictions and evaluation --------------------------------------------

inline json predictions_to_json(const std::vector<Prediction>& preds) {
  json arr = json::array();
  for (const Prediction& p : preds) {
    arr.push_back({{"mask", mask_to_json(p.mask)}, {"cat", p.category}, {"score", p.score}});
  }
  return arr;
}

inline std::vector<Prediction> predictions_from_json(const json& j,
                                                     const std::string& where = "predictions") {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of predictions");
  std::vector<Prediction> preds;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string iw = where + "[" + std::to_string(i) + "]";
    Prediction p;
    p.mask = mask_from_json(require_field(j[i], "mask", iw), iw + ".mask");
    p.category = require_uint(j[i], "cat", iw);
    p.score = require_number(j[i], "score", iw);
    if (p.category == 0) throw ConfigError(iw + ": prediction category must be >= 1");
    if (p.mask.empty()) throw ConfigError(iw + ": prediction mask is empty");
    preds.push_back(std::move(p));
  }
  return preds;
}

inline json eval_result_to_json(const EvalResult& r) {
  static const std::array<const char*, 4> names{"25", "50", "70", "75"};
  json cats = json::array();
  for (const CategoryEval& ce : r.categories) {
    json ap;
    for (std::size_t t = 0; t < names.size(); ++t) ap[names[t]] = ce.ap[t];
    cats.push_back({{"cat", ce.category}, {"gt_count", ce.gt_count}, {"ap", std::move(ap)}});
  }
  json map;
  for (std::size_t t = 0; t < names.size(); ++t) map[names[t]] = r.map[t];
  return json{{"thresholds", kEvalThresholds},
              {"categories", std::move(cats)},
              {"map", std::move(map)}};
}

inline std::string pr_curves_to_csv(const EvalResult& r) {
  std::ostringstream out;
  out << "category,threshold,recall,precision\n";
  for (const CategoryEval& ce : r.categories) {
    for (std::size_t t = 0; t < kEvalThresholds.size(); ++t) {
      for (const PrPoint& p : ce.pr[t]) {
        out << ce.category << ',' << kEvalThresholds[t] << ',' << p.recall << ','
            << p.precision << '\n';
      }
    }
  }
  return out.str();
}

// ---- branch trajectories ----------------------------------------------------

inline json branch_record_to_json(const BranchRecord& rec) {
  json seeds = json::array();
  for (std::size_t c = 1; c < rec.seeds.by_category.size(); ++c) {
    if (!rec.seeds.by_category[c].empty()) {
      seeds.push_back({{"cat", c}, {"proposals", rec.seeds.by_category[c]}});
    }
  }
  json out{{"branch", rec.branch},
           {"seeds", std::move(seeds)},
           {"gt", pseudo_gt_to_json(rec.gt)},
           {"labels", refined_labels_to_json(rec.labels)},
           {"ref_loss", {{"classification", rec.ref_loss.classification},
                         {"integrity", rec.ref_loss.integrity},
                         {"total", rec.ref_loss.total}}},
           {"seed_mean_iou", rec.seed_mean_iou},
           {"gt_mean_iou", rec.gt_mean_iou}};
  if (rec.sampled) out["sampled_gt"] = pseudo_gt_to_json(rec.sampled_gt);
  return out;
}

inline json trajectory_to_json(const RunResult& run) {
  json arr = json::array();
  for (const BranchRecord& rec : run.branches) arr.push_back(branch_record_to_json(rec));
  return arr;
}

// ---- manifest ----------------------------------------------------------------

// Reproducibility record: config snapshot, seed fan-out, input/output digests,
// and per-branch summary statistics. Re-running with the same manifest inputs
// must reproduce the same output digests.
struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  json config;
  std::map<std::string, std::uint64_t> module_seeds;
  std::map<std::string, std::string> inputs;   // file name → digest
  std::map<std::string, std::string> outputs;  // file name → digest
  json summary;
};

inline json manifest_to_json(const RunManifest& m) {
  return json{{"version", std::string(kLibraryVersion)},
              {"command", m.command},
              {"seed", m.seed},
              {"config", m.config},
              {"module_seeds", m.module_seeds},
              {"inputs", m.inputs},
              {"outputs", m.outputs},
              {"summary", m.summary}};
}

}  // namespace cim

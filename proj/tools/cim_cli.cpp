// Command-line front end for the pseudo-label mining pipeline: synthetic
// dataset generation, pre-computed labeling, refinement runs, loss reports,
// and mAP evaluation. All randomness flows from a single --seed flag.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cim/json_io.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitIo = 2;

cim::PipelineConfig load_config(const std::string& path) {
  if (path.empty()) return cim::PipelineConfig{};
  return cim::pipeline_config_from_json(cim::load_json_file(path), path);
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw cim::IoError("cannot create directory: " + dir.string());
}

struct Dataset {
  cim::Scene scene;
  cim::GeneratedProposals proposals;
  std::vector<cim::PeakCue> peaks;
};

Dataset load_dataset(const fs::path& dir) {
  Dataset d;
  d.scene = cim::scene_from_json(cim::load_json_file(dir / "scene.json"), "scene.json");
  d.proposals = cim::proposals_from_json(cim::load_json_file(dir / "proposals.json"),
                                         "proposals.json");
  d.peaks = cim::peaks_from_json(cim::load_json_file(dir / "peaks.json"), "peaks.json");
  if (d.proposals.masks.height() != d.scene.height ||
      d.proposals.masks.width() != d.scene.width) {
    throw cim::ConfigError("proposals.json: canvas does not match scene.json");
  }
  for (const cim::PeakCue& p : d.peaks) {
    if (p.row >= d.scene.height || p.col >= d.scene.width) {
      throw cim::ConfigError("peaks.json: peak outside scene canvas");
    }
    if (p.category > d.scene.num_categories) {
      throw cim::ConfigError("peaks.json: peak category out of range");
    }
  }
  return d;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir, std::uint64_t seed) {
  const cim::PipelineConfig cfg = load_config(config_path);
  ensure_directory(out_dir);

  const cim::Scene scene = cim::generate_scene(cfg.scene, seed);
  const cim::GeneratedProposals props = cim::generate_proposals(scene, cfg.recipe, seed);
  const std::vector<cim::PeakCue> peaks = cim::generate_peaks(scene, props);
  for (const std::string& warning : props.warnings) {
    std::cerr << "warning: " << warning << "\n";
  }

  const fs::path out(out_dir);
  cim::save_json_file(out / "scene.json", cim::scene_to_json(scene));
  cim::save_json_file(out / "proposals.json", cim::proposals_to_json(props));
  cim::save_json_file(out / "peaks.json", cim::peaks_to_json(peaks));

  cim::RunManifest manifest;
  manifest.command = "synth";
  manifest.seed = seed;
  manifest.config = cim::pipeline_config_to_json(cfg);
  manifest.module_seeds = {{"scene", cim::derive_seed(seed, "scene")},
                           {"proposals", cim::derive_seed(seed, "proposals")}};
  for (const char* name : {"scene.json", "proposals.json", "peaks.json"}) {
    manifest.outputs[name] = cim::file_digest(out / name);
  }
  manifest.summary = {{"instances", scene.instances.size()},
                      {"proposals", props.masks.size()},
                      {"peaks", peaks.size()}};
  cim::save_json_file(out / "manifest.json", cim::manifest_to_json(manifest));
  std::cout << "wrote dataset to " << out_dir << " (" << props.masks.size() << " proposals)\n";
  return kExitOk;
}

int cmd_agpl(const std::string& dataset_dir, const std::string& out_path) {
  const Dataset d = load_dataset(dataset_dir);
  const auto supports = cim::compute_support_masks(d.proposals.masks, d.peaks);
  const auto labels =
      cim::assign_precomputed_labels(d.proposals.masks, supports, d.scene.num_categories);
  cim::save_json_file(out_path, cim::precomputed_labels_to_json(labels, supports));
  std::cout << "wrote labels to " << out_path << " (" << supports.size() << " support masks)\n";
  return kExitOk;
}

int cmd_run(const std::string& dataset_dir, const std::string& config_path,
            const std::string& out_dir, std::uint64_t seed, std::size_t branches_override,
            int sample_override) {
  cim::PipelineConfig cfg = load_config(config_path);
  if (branches_override > 0) cfg.cim.branch_count = branches_override;
  if (sample_override >= 0) cfg.sample = sample_override != 0;
  cfg.validate();

  const Dataset d = load_dataset(dataset_dir);
  ensure_directory(out_dir);

  const cim::RunResult run =
      cim::run_refinement(d.scene, d.proposals.masks, d.peaks, cfg.refinement(), seed);
  const std::vector<cim::Prediction> preds =
      cim::predictions_from_scores(d.proposals.masks, run.final_scores);

  const fs::path out(out_dir);
  cim::save_json_file(out / "trajectory.json", cim::trajectory_to_json(run));
  cim::save_json_file(out / "predictions.json", cim::predictions_to_json(preds));
  cim::save_json_file(out / "losses.json", cim::loss_report_to_json(run.loss));
  cim::save_json_file(out / "labels.json",
                      cim::precomputed_labels_to_json(run.agpl, run.supports));

  cim::RunManifest manifest;
  manifest.command = "run";
  manifest.seed = seed;
  manifest.config = cim::pipeline_config_to_json(cfg);
  manifest.module_seeds = {{"scorer", cim::derive_seed(seed, "scorer")},
                           {"sampler", cim::derive_seed(seed, "sampler")}};
  const fs::path in(dataset_dir);
  for (const char* name : {"scene.json", "proposals.json", "peaks.json"}) {
    manifest.inputs[name] = cim::file_digest(in / name);
  }
  for (const char* name : {"trajectory.json", "predictions.json", "losses.json", "labels.json"}) {
    manifest.outputs[name] = cim::file_digest(out / name);
  }
  cim::json branch_summary = cim::json::array();
  for (const cim::BranchRecord& rec : run.branches) {
    branch_summary.push_back({{"branch", rec.branch},
                              {"seeds", rec.seeds.total()},
                              {"gt", rec.gt.total()},
                              {"fg", rec.labels.fg_count},
                              {"bg", rec.labels.bg_count},
                              {"seed_mean_iou", rec.seed_mean_iou},
                              {"gt_mean_iou", rec.gt_mean_iou}});
  }
  manifest.summary = {{"branches", std::move(branch_summary)},
                      {"l_total", run.loss.total()},
                      {"predictions", preds.size()}};
  cim::save_json_file(out / "manifest.json", cim::manifest_to_json(manifest));
  std::cout << "run complete: " << run.branches.size() - 1 << " refinement branches, l_total="
            << run.loss.total() << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& pred_path, const std::string& dataset_dir,
             const std::string& out_path, const std::string& pr_csv_path) {
  const cim::Scene scene =
      cim::scene_from_json(cim::load_json_file(fs::path(dataset_dir) / "scene.json"),
                           "scene.json");
  const auto preds =
      cim::predictions_from_json(cim::load_json_file(pred_path), pred_path);
  for (const cim::Prediction& p : preds) {
    if (p.mask.height() != scene.height || p.mask.width() != scene.width) {
      throw cim::ConfigError(pred_path + ": prediction canvas does not match scene");
    }
    if (p.category > scene.num_categories) {
      throw cim::ConfigError(pred_path + ": prediction category out of range");
    }
  }

  const cim::EvalResult result = cim::evaluate(preds, scene);
  cim::save_json_file(out_path, cim::eval_result_to_json(result));
  if (!pr_csv_path.empty()) {
    cim::write_text_file(pr_csv_path, cim::pr_curves_to_csv(result));
  }
  std::cout << "mAP_25=" << result.map[0] << " mAP_50=" << result.map[1]
            << " mAP_70=" << result.map[2] << " mAP_75=" << result.map[3] << "\n";
  return kExitOk;
}

int cmd_report(const std::string& run_dir) {
  const cim::json losses = cim::load_json_file(fs::path(run_dir) / "losses.json");
  const cim::json& ref = losses.at("l_ref");
  double recomputed = losses.at("l_anti").at("total").get<double>();
  std::cout << "anti-noise loss: bce=" << losses.at("l_anti").at("bce").get<double>()
            << " pcl=" << losses.at("l_anti").at("pcl").get<double>()
            << " total=" << losses.at("l_anti").at("total").get<double>() << "\n";
  for (std::size_t k = 0; k < ref.size(); ++k) {
    std::cout << "refinement branch " << k + 1
              << ": classification=" << ref[k].at("classification").get<double>()
              << " integrity=" << ref[k].at("integrity").get<double>()
              << " total=" << ref[k].at("total").get<double>() << "\n";
    recomputed += ref[k].at("total").get<double>();
  }
  const double reported = losses.at("l_total").get<double>();
  std::cout << "l_total=" << reported << "\n";
  if (reported != recomputed) {
    throw cim::ConfigError("losses.json: l_total does not equal the sum of its components");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complete-instance mining pipeline for weakly supervised segmentation"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 1;
  app.add_option("--seed", seed, "Root seed; all module seeds derive from it")
      ->capture_default_str();

  std::string config_path, out_dir, dataset_dir, pred_path, out_path, pr_csv, run_dir;
  std::size_t branches_override = 0;
  int sample_override = -1;

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset directory");
  synth->add_option("--config", config_path, "Pipeline config JSON (defaults when omitted)");
  synth->add_option("--out", out_dir, "Output dataset directory")->required();

  CLI::App* agpl = app.add_subcommand("agpl", "Compute pre-computed labels for a dataset");
  agpl->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  agpl->add_option("--out", out_path, "Output labels JSON")->required();

  CLI::App* run = app.add_subcommand("run", "Run the full refinement pipeline");
  run->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  run->add_option("--config", config_path, "Pipeline config JSON (defaults when omitted)");
  run->add_option("--out", out_dir, "Output run directory")->required();
  run->add_option("--branches", branches_override, "Override the refinement branch count");
  bool flag_sample = false, flag_no_sample = false;
  CLI::Option* opt_sample =
      run->add_flag("--sample", flag_sample, "Enable anti-noise sampling of the pseudo GT");
  run->add_flag("--no-sample", flag_no_sample, "Disable anti-noise sampling")
      ->excludes(opt_sample);

  CLI::App* eval = app.add_subcommand("eval", "Evaluate predictions against a dataset");
  eval->add_option("--pred", pred_path, "Predictions JSON")->required();
  eval->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  eval->add_option("--out", out_path, "Output result JSON")->required();
  eval->add_option("--pr-csv", pr_csv, "Optional PR-curve CSV path");

  CLI::App* report = app.add_subcommand("report", "Print the loss report of a run directory");
  report->add_option("--run", run_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (synth->parsed()) return cmd_synth(config_path, out_dir, seed);
    if (agpl->parsed()) return cmd_agpl(dataset_dir, out_path);
    if (run->parsed()) {
      if (flag_sample) sample_override = 1;
      if (flag_no_sample) sample_override = 0;
      return cmd_run(dataset_dir, config_path, out_dir, seed, branches_override, sample_override);
    }
    if (eval->parsed()) return cmd_eval(pred_path, dataset_dir, out_path, pr_csv);
    if (report->parsed()) return cmd_report(run_dir);
  } catch (const cim::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const cim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

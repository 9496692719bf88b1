// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// opiq command-line interface: train, eval, ablate, calibrate-a, synth and
// report subcommands. Every defined failure exits nonzero with a
// machine-readable error object on stderr.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "opiq/opiq.hpp"

namespace {

namespace fs = std::filesystem;
using opiq::json;

struct TrainArgs {
  std::string config_path;
  std::string out_dir;
  int split_index = 0;
  // flag overrides, applied on top of the config file
  std::optional<std::string> manifest;
  std::optional<std::string> backbone;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::optional<double> a;
  std::optional<int> hidden_channels;
  std::optional<int> num_levels;
  std::optional<double> lambda_mix;
  std::optional<bool> direct_pathway;
  std::optional<bool> indirect_pathway;
  std::optional<double> alpha, beta, gamma;
  std::optional<bool> emd_enabled, l1_enabled, esd_enabled;
  std::optional<std::uint64_t> split_seed;
  std::optional<int> split_repeats;
  std::optional<double> train_fraction;
  std::vector<int> stage_mask;
};

opiq::RunConfig resolve_config(const TrainArgs& args) {
  opiq::RunConfig config;
  if (!args.config_path.empty()) {
    config = opiq::load_run_config(args.config_path);
  }
  if (args.manifest) config.manifest_path = *args.manifest;
  if (args.backbone) config.backbone = *args.backbone;
  if (args.epochs) config.epochs = *args.epochs;
  if (args.batch_size) config.batch_size = *args.batch_size;
  if (args.lr) config.optimizer.lr = *args.lr;
  if (args.seed) config.seed = *args.seed;
  if (args.a) config.a = *args.a;
  if (args.hidden_channels) config.slm.hidden_channels = *args.hidden_channels;
  if (args.num_levels) config.slm.num_levels = *args.num_levels;
  if (args.lambda_mix) config.slm.lambda_mix = *args.lambda_mix;
  if (args.direct_pathway) config.slm.enable_direct_pathway = *args.direct_pathway;
  if (args.indirect_pathway) {
    config.slm.enable_indirect_pathway = *args.indirect_pathway;
  }
  if (args.alpha) config.weights.alpha = *args.alpha;
  if (args.beta) config.weights.beta = *args.beta;
  if (args.gamma) config.weights.gamma = *args.gamma;
  if (args.emd_enabled) config.weights.emd_enabled = *args.emd_enabled;
  if (args.l1_enabled) config.weights.l1_enabled = *args.l1_enabled;
  if (args.esd_enabled) config.weights.esd_enabled = *args.esd_enabled;
  if (args.split_seed) config.split.seed = *args.split_seed;
  if (args.split_repeats) config.split.num_repeats = *args.split_repeats;
  if (args.train_fraction) config.split.train_fraction = *args.train_fraction;
  if (!args.stage_mask.empty()) {
    opiq::require(args.stage_mask.size() == 3, opiq::ErrorKind::ConfigError,
                  "--stage-mask needs exactly 3 values of 0/1");
    for (int i = 0; i < 3; ++i) {
      config.stage_mask[static_cast<std::size_t>(i)] =
          args.stage_mask[static_cast<std::size_t>(i)] != 0;
    }
  }
  return config;
}

void write_json_output(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  const fs::path path(out_path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  opiq::require(out.good(), opiq::ErrorKind::IoError,
                "cannot write " + out_path);
  out << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"opinion-distribution image quality toolkit"};
  app.require_subcommand(1);

  // train
  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a model on one split");
  train->add_option("--config", train_args.config_path, "run config JSON file");
  train->add_option("--out", train_args.out_dir, "output directory")->required();
  train->add_option("--split-index", train_args.split_index, "split to train on");
  train->add_option("--manifest", [&](const CLI::results_t& r) { train_args.manifest = r[0]; return true; }, "dataset manifest path");
  train->add_option("--backbone", [&](const CLI::results_t& r) { train_args.backbone = r[0]; return true; }, "backbone name");
  train->add_option("--epochs", [&](const CLI::results_t& r) { train_args.epochs = std::stoi(r[0]); return true; }, "training epochs");
  train->add_option("--batch-size", [&](const CLI::results_t& r) { train_args.batch_size = std::stoi(r[0]); return true; }, "batch size");
  train->add_option("--lr", [&](const CLI::results_t& r) { train_args.lr = std::stod(r[0]); return true; }, "learning rate");
  train->add_option("--seed", [&](const CLI::results_t& r) { train_args.seed = std::stoull(r[0]); return true; }, "run seed");
  train->add_option("--a", [&](const CLI::results_t& r) { train_args.a = std::stod(r[0]); return true; }, "dispersion coefficient");
  train->add_option("--hidden-channels", [&](const CLI::results_t& r) { train_args.hidden_channels = std::stoi(r[0]); return true; }, "memory hidden channels");
  train->add_option("--levels", [&](const CLI::results_t& r) { train_args.num_levels = std::stoi(r[0]); return true; }, "quality levels");
  train->add_option("--lambda", [&](const CLI::results_t& r) { train_args.lambda_mix = std::stod(r[0]); return true; }, "memory/algorithmic mixture weight");
  train->add_option("--direct-pathway", [&](const CLI::results_t& r) { train_args.direct_pathway = (r[0] == "1" || r[0] == "true"); return true; }, "enable the direct pathway (0/1)");
  train->add_option("--indirect-pathway", [&](const CLI::results_t& r) { train_args.indirect_pathway = (r[0] == "1" || r[0] == "true"); return true; }, "enable the indirect pathway (0/1)");
  train->add_option("--alpha", [&](const CLI::results_t& r) { train_args.alpha = std::stod(r[0]); return true; }, "EMD weight");
  train->add_option("--beta", [&](const CLI::results_t& r) { train_args.beta = std::stod(r[0]); return true; }, "L1 weight");
  train->add_option("--gamma", [&](const CLI::results_t& r) { train_args.gamma = std::stod(r[0]); return true; }, "ESD weight");
  train->add_option("--emd", [&](const CLI::results_t& r) { train_args.emd_enabled = (r[0] == "1" || r[0] == "true"); return true; }, "enable the EMD loss (0/1)");
  train->add_option("--l1", [&](const CLI::results_t& r) { train_args.l1_enabled = (r[0] == "1" || r[0] == "true"); return true; }, "enable the L1 loss (0/1)");
  train->add_option("--esd", [&](const CLI::results_t& r) { train_args.esd_enabled = (r[0] == "1" || r[0] == "true"); return true; }, "enable the ESD loss (0/1)");
  train->add_option("--split-seed", [&](const CLI::results_t& r) { train_args.split_seed = std::stoull(r[0]); return true; }, "split plan seed");
  train->add_option("--split-repeats", [&](const CLI::results_t& r) { train_args.split_repeats = std::stoi(r[0]); return true; }, "number of splits");
  train->add_option("--train-fraction", [&](const CLI::results_t& r) { train_args.train_fraction = std::stod(r[0]); return true; }, "train fraction");
  train->add_option("--stage-mask", train_args.stage_mask, "three 0/1 flags for the fused stages")->expected(3);

  // eval
  std::string eval_checkpoint, eval_manifest, eval_partition = "test", eval_out;
  int eval_split_index = -1;
  opiq::SplitConfig eval_split;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint path")->required();
  eval->add_option("--manifest", eval_manifest, "dataset manifest path")->required();
  eval->add_option("--split-index", eval_split_index,
                   "evaluate one split (default: all splits plus the mean)");
  eval->add_option("--partition", eval_partition, "train | test | all");
  eval->add_option("--split-seed", eval_split.seed, "split plan seed");
  eval->add_option("--split-repeats", eval_split.num_repeats, "number of splits");
  eval->add_option("--train-fraction", eval_split.train_fraction, "train fraction");
  eval->add_option("--out", eval_out, "results JSON path (default stdout)");

  // ablate
  TrainArgs ablate_args;
  std::string ablate_axis;
  CLI::App* ablate = app.add_subcommand("ablate", "run one ablation axis");
  ablate->add_option("--config", ablate_args.config_path, "base run config")->required();
  ablate->add_option("--axis", ablate_axis, "stages | pathways | losses | balance")->required();
  ablate->add_option("--out", ablate_args.out_dir, "output directory")->required();
  ablate->add_option("--split-index", ablate_args.split_index, "split to use");

  // calibrate-a
  std::string cal_manifest, cal_out;
  CLI::App* calibrate = app.add_subcommand(
      "calibrate-a", "fit the dispersion coefficient from SOS labels");
  calibrate->add_option("--manifest", cal_manifest, "dataset manifest path")->required();
  calibrate->add_option("--out", cal_out, "report JSON path (default stdout)");

  // synth
  std::string synth_out, synth_category = "dos";
  int synth_n = 32, synth_levels = 5, synth_image_size = 96;
  std::uint64_t synth_seed = 0;
  double synth_a = 0.1477;
  std::vector<double> synth_range = {1.0, 5.0};
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--n", synth_n, "number of images");
  synth->add_option("--category", synth_category, "dos | mos_sos | mos_only");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--a-true", synth_a, "dispersion coefficient used for labels");
  synth->add_option("--levels", synth_levels, "quality levels");
  synth->add_option("--range", synth_range, "score range lo hi")->expected(2);
  synth->add_option("--image-size", synth_image_size, "square image size");

  // report
  std::string report_results, report_out;
  CLI::App* report = app.add_subcommand("report", "summarize result JSON files");
  report->add_option("--results", report_results, "directory of result JSON files")->required();
  report->add_option("--out", report_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const opiq::RunConfig config = resolve_config(train_args);
      const opiq::TrainOutputs outputs =
          opiq::train_command(config, train_args.out_dir, train_args.split_index);
      json j{{"checkpoint", outputs.checkpoint.string()},
             {"loss_log", outputs.loss_log.string()},
             {"config", outputs.resolved_config.string()},
             {"epochs", outputs.log.size()}};
      if (!outputs.log.empty()) j["final_total_loss"] = outputs.log.back().total;
      std::cout << j.dump(2) << "\n";
    } else if (eval->parsed()) {
      std::optional<int> split_index;
      if (eval_split_index >= 0) split_index = eval_split_index;
      const json results = opiq::eval_command(
          eval_checkpoint, eval_manifest, eval_split, split_index,
          opiq::eval_partition_from_name(eval_partition));
      write_json_output(results, eval_out);
    } else if (ablate->parsed()) {
      const opiq::RunConfig base = resolve_config(ablate_args);
      const std::vector<opiq::AblationRow> rows = opiq::ablate_command(
          base, opiq::ablation_axis_from_name(ablate_axis),
          ablate_args.split_index);
      fs::create_directories(ablate_args.out_dir);
      const json table = opiq::ablation_rows_to_json(rows);
      write_json_output(table,
                        (fs::path(ablate_args.out_dir) / "ablation.json").string());
      std::cout << table.dump(2) << "\n";
    } else if (calibrate->parsed()) {
      write_json_output(opiq::calibrate_a_command(cal_manifest), cal_out);
    } else if (synth->parsed()) {
      opiq::LabelCategory category = opiq::LabelCategory::DosAvailable;
      if (synth_category == "dos") category = opiq::LabelCategory::DosAvailable;
      else if (synth_category == "mos_sos") category = opiq::LabelCategory::MosSosAvailable;
      else if (synth_category == "mos_only") category = opiq::LabelCategory::MosOnly;
      else opiq::raise(opiq::ErrorKind::ConfigError,
                       "unknown category '" + synth_category + "'");
      const opiq::QualityScale scale = opiq::QualityScale::evenly_spaced(
          synth_levels, synth_range[0], synth_range[1]);
      const opiq::SyntheticDataset data = opiq::generate_synthetic_dataset(
          synth_n, scale, category, synth_seed, synth_a, synth_out,
          synth_image_size);
      const fs::path manifest_path = fs::path(synth_out) / "manifest.jsonl";
      opiq::save_manifest(data.manifest, manifest_path);
      opiq::save_oracle(data.oracle, fs::path(synth_out) / "oracle.jsonl");
      std::cout << json{{"manifest", manifest_path.string()},
                        {"images", synth_n}}
                       .dump(2)
                << "\n";
    } else if (report->parsed()) {
      opiq::report_command(report_results, report_out);
      std::cout << json{{"summary",
                         (fs::path(report_out) / "summary.md").string()},
                        {"chart", (fs::path(report_out) / "srcc.svg").string()}}
                       .dump(2)
                << "\n";
    }
  } catch (const opiq::Error& e) {
    std::cerr << json{{"error",
                       {{"kind", e.kind_name()}, {"message", e.what()}}}}
                     .dump()
              << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"kind", "Internal"}, {"message", e.what()}}}}
                     .dump()
              << "\n";
    return 2;
  }
  return 0;
}

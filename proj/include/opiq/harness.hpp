// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// Command implementations behind the CLI: train, eval, ablate, calibrate-a,
// synth, report. Everything is a plain function so tests drive the same
// code paths as the executable.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "opiq/ablation.hpp"
#include "opiq/checkpoint.hpp"
#include "opiq/config.hpp"
#include "opiq/evaluate.hpp"
#include "opiq/manifest.hpp"
#include "opiq/report.hpp"
#include "opiq/splits.hpp"
#include "opiq/synthetic.hpp"
#include "opiq/train.hpp"

namespace opiq {

enum class EvalPartition { Train, Test, All };

inline EvalPartition eval_partition_from_name(const std::string& name) {
  if (name == "train") return EvalPartition::Train;
  if (name == "test") return EvalPartition::Test;
  if (name == "all") return EvalPartition::All;
  raise(ErrorKind::ConfigError, "unknown partition '" + name + "'");
}

struct TrainOutputs {
  std::filesystem::path checkpoint;
  std::filesystem::path loss_log;
  std::filesystem::path resolved_config;
  std::vector<EpochLoss> log;
};

inline SplitPlan splits_for(const DatasetManifest& manifest,
                            const SplitConfig& cfg) {
  return make_splits(static_cast<int>(manifest.entries.size()), cfg.seed,
                     cfg.num_repeats, cfg.train_fraction);
}

inline Model build_model(const RunConfig& config, const QualityScale& scale) {
  config.validate();
  return Model(make_backbone(config.backbone, config.seed), config.slm, scale,
               config.seed, config.stage_mask);
}

// Train on one split's training partition; write the checkpoint, a
// JSON-lines loss log, and the fully resolved config.
inline TrainOutputs train_command(const RunConfig& config,
                                  const std::filesystem::path& out_dir,
                                  int split_index = 0) {
  config.validate();
  const DatasetManifest manifest = load_manifest(config.manifest_path);
  const SplitPlan plan = splits_for(manifest, config.split);
  require(split_index >= 0 && split_index < plan.num_repeats,
          ErrorKind::ConfigError, "split index out of range");

  Model model = build_model(config, manifest.scale);
  const std::vector<EpochLoss> log = train_model(
      model, manifest, plan.splits[static_cast<std::size_t>(split_index)].train,
      config);

  std::filesystem::create_directories(out_dir);
  TrainOutputs outputs;
  outputs.log = log;
  outputs.checkpoint = out_dir / "model.ckpt";
  save_checkpoint(model, outputs.checkpoint);

  outputs.loss_log = out_dir / "loss_log.jsonl";
  {
    std::ofstream out(outputs.loss_log);
    require(out.good(), ErrorKind::IoError,
            "cannot write " + outputs.loss_log.string());
    for (const EpochLoss& e : log) {
      out << json{{"epoch", e.epoch},
                  {"total", e.total},
                  {"emd", e.emd},
                  {"l1", e.l1},
                  {"esd", e.esd}}
                 .dump()
          << "\n";
    }
  }

  outputs.resolved_config = out_dir / "config.json";
  save_run_config(config, outputs.resolved_config);
  return outputs;
}

inline std::vector<int> partition_indices(const Split& split,
                                          EvalPartition partition) {
  switch (partition) {
    case EvalPartition::Train: return split.train;
    case EvalPartition::Test: return split.test;
    case EvalPartition::All: {
      std::vector<int> all = split.train;
      all.insert(all.end(), split.test.begin(), split.test.end());
      std::sort(all.begin(), all.end());
      return all;
    }
  }
  raise(ErrorKind::ConfigError, "bad partition");
}

// Evaluate a checkpoint. With a split index: that split only; without: every
// split in the plan plus the mean row.
inline json eval_command(const std::filesystem::path& checkpoint_path,
                         const std::filesystem::path& manifest_path,
                         const SplitConfig& split_config,
                         std::optional<int> split_index,
                         EvalPartition partition = EvalPartition::Test) {
  Model model = load_checkpoint(checkpoint_path);
  const DatasetManifest manifest = load_manifest(manifest_path);
  require(model.scale() == manifest.scale, ErrorKind::ConfigError,
          "checkpoint and manifest disagree on the quality scale");
  const SplitPlan plan = splits_for(manifest, split_config);

  std::vector<SplitEvalResult> results;
  std::vector<int> split_ids;
  if (split_index) {
    require(*split_index >= 0 && *split_index < plan.num_repeats,
            ErrorKind::ConfigError, "split index out of range");
    split_ids.push_back(*split_index);
  } else {
    for (int k = 0; k < plan.num_repeats; ++k) split_ids.push_back(k);
  }
  for (int k : split_ids) {
    const std::vector<int> indices =
        partition_indices(plan.splits[static_cast<std::size_t>(k)], partition);
    results.push_back(
        evaluate_model(model, manifest, indices, k, plan.split_hash(k)));
  }

  json out = json::array();
  for (const SplitEvalResult& r : results) out.push_back(eval_result_to_json(r));
  if (results.size() > 1) out.push_back(mean_results_json(results));
  return out;
}

struct AblationRow {
  std::string variant;
  bool failed = false;
  std::string error;
  double train_srcc = 0.0;
  double test_srcc = 0.0;
  double test_plcc = 0.0;
  std::uint64_t split_hash = 0;
};

// Train+eval every variant of one axis on identical splits. Per-variant
// failures are recorded, not fatal.
inline std::vector<AblationRow> ablate_command(const RunConfig& base,
                                               AblationAxis axis,
                                               int split_index = 0) {
  base.validate();
  const DatasetManifest manifest = load_manifest(base.manifest_path);
  const SplitPlan plan = splits_for(manifest, base.split);
  require(split_index >= 0 && split_index < plan.num_repeats,
          ErrorKind::ConfigError, "split index out of range");
  const Split& split = plan.splits[static_cast<std::size_t>(split_index)];
  const std::uint64_t split_hash = plan.split_hash(split_index);

  std::vector<AblationRow> rows;
  for (const AblationVariant& variant : make_ablation_variants(base, axis)) {
    AblationRow row;
    row.variant = variant.name;
    row.split_hash = split_hash;
    try {
      Model model = build_model(variant.config, manifest.scale);
      train_model(model, manifest, split.train, variant.config);
      const SplitEvalResult train_eval = evaluate_model(
          model, manifest, split.train, split_index, split_hash);
      const SplitEvalResult test_eval = evaluate_model(
          model, manifest, split.test, split_index, split_hash);
      row.train_srcc = train_eval.mos.srcc;
      row.test_srcc = test_eval.mos.srcc;
      row.test_plcc = test_eval.mos.plcc;
    } catch (const Error& e) {
      row.failed = true;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json ablation_rows_to_json(const std::vector<AblationRow>& rows) {
  json out;
  out["rows"] = json::array();
  for (const AblationRow& r : rows) {
    json j{{"variant", r.variant},
           {"failed", r.failed},
           {"split_hash", r.split_hash}};
    if (r.failed) {
      j["error"] = r.error;
    } else {
      j["mos"] = {{"srcc", r.test_srcc}, {"plcc", r.test_plcc}};
      j["train_srcc"] = r.train_srcc;
    }
    out["rows"].push_back(j);
  }
  return out;
}

// Fit the dispersion coefficient from a manifest that carries SOS directly
// or derivably (through its distributions).
inline json calibrate_a_command(const std::filesystem::path& manifest_path) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  require(manifest.category != LabelCategory::MosOnly, ErrorKind::ConfigError,
          "calibrating a needs SOS labels: provide a MOS_SOS_AVAILABLE or "
          "DOS_AVAILABLE manifest");
  std::vector<std::pair<double, double>> samples;
  int skipped = 0;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const SampleLabels labels = manifest.labels_for(i);
    const double sos = manifest.category == LabelCategory::DosAvailable
                           ? sos_of(*labels.dos)
                           : *labels.sos;
    if (labels.mos <= manifest.scale.range_start() ||
        labels.mos >= manifest.scale.range_end()) {
      ++skipped;  // boundary means carry no information about a
      continue;
    }
    samples.emplace_back(labels.mos, sos);
  }
  const double a = fit_a(samples, manifest.scale);

  double ss_res = 0.0;
  double ss_tot = 0.0;
  double mean_sq = 0.0;
  for (const auto& [mos, sos] : samples) mean_sq += sos * sos;
  mean_sq /= static_cast<double>(samples.size());
  for (const auto& [mos, sos] : samples) {
    const double fitted = a * dispersion_quadratic(mos, manifest.scale);
    ss_res += (sos * sos - fitted) * (sos * sos - fitted);
    ss_tot += (sos * sos - mean_sq) * (sos * sos - mean_sq);
  }
  return json{{"a", a},
              {"sample_count", samples.size()},
              {"skipped_boundary_samples", skipped},
              {"rmse_sos_squared",
               std::sqrt(ss_res / static_cast<double>(samples.size()))},
              {"r_squared", ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0}};
}

inline void report_command(const std::filesystem::path& results_dir,
                           const std::filesystem::path& out_dir) {
  const std::vector<ReportRow> rows = load_report_rows(results_dir);
  const std::vector<std::string> columns = shared_columns(rows);
  require(!columns.empty(), ErrorKind::NoResults,
          "result rows share no metric columns");
  std::filesystem::create_directories(out_dir);
  write_summary_markdown(rows, columns, mean_row(rows, columns),
                         out_dir / "summary.md");
  write_bar_chart_svg(rows, "mos.srcc", out_dir / "srcc.svg");
}

}  // namespace opiq

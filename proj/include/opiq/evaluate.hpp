// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// Model evaluation over a manifest subset: scalar-score criteria always,
// distribution criteria when the database carries ground-truth
// distributions. Results serialize to the shared JSON schema.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "opiq/error.hpp"
#include "opiq/image.hpp"
#include "opiq/manifest.hpp"
#include "opiq/metrics.hpp"
#include "opiq/network.hpp"
#include "opiq/rng.hpp"

namespace opiq {

struct SplitEvalResult {
  int split_id = 0;
  std::uint64_t split_hash = 0;
  int sample_count = 0;
  MosEvalReport mos;
  std::optional<DosEvalReport> dos;
};

inline SplitEvalResult evaluate_model(Model& model,
                                      const DatasetManifest& manifest,
                                      std::span<const int> indices,
                                      int split_id = 0,
                                      std::uint64_t split_hash = 0) {
  require(model.scale() == manifest.scale, ErrorKind::ConfigError,
          "checkpoint scale does not match the manifest scale");
  require(indices.size() >= 3, ErrorKind::ConfigError,
          "evaluation needs at least 3 samples");
  const PreprocessSpec prep = model.backbone_contract().preprocess;
  Rng unused_rng(0);  // eval preprocessing is crop-deterministic

  std::vector<double> pred_mos;
  std::vector<double> gt_mos;
  pred_mos.reserve(indices.size());
  gt_mos.reserve(indices.size());

  const bool has_dos = manifest.category == LabelCategory::DosAvailable;
  DosEvalReport dos_sum;

  for (int idx : indices) {
    const Image raw =
        read_ppm(manifest.resolve_image_path(static_cast<std::size_t>(idx)));
    const Image input = preprocess(raw, prep, /*train_mode=*/false, unused_rng);
    const QualityPrediction pred = model.predict_image(input);
    const SampleLabels labels =
        manifest.labels_for(static_cast<std::size_t>(idx));
    pred_mos.push_back(pred.mos_p);
    gt_mos.push_back(labels.mos);
    if (has_dos) {
      const DosEvalReport r = dos_metrics(pred.d_p, *labels.dos);
      dos_sum.jsd += r.jsd;
      dos_sum.emd += r.emd;
      dos_sum.rmse += r.rmse;
      dos_sum.intersection += r.intersection;
      dos_sum.cosine += r.cosine;
    }
  }

  SplitEvalResult result;
  result.split_id = split_id;
  result.split_hash = split_hash;
  result.sample_count = static_cast<int>(indices.size());
  result.mos = mos_eval(pred_mos, gt_mos);
  if (has_dos) {
    const double inv = 1.0 / static_cast<double>(indices.size());
    result.dos = DosEvalReport{dos_sum.jsd * inv, dos_sum.emd * inv,
                               dos_sum.rmse * inv, dos_sum.intersection * inv,
                               dos_sum.cosine * inv};
  }
  return result;
}

inline json eval_result_to_json(const SplitEvalResult& r) {
  json j{{"split_id", r.split_id},
         {"split_hash", r.split_hash},
         {"sample_count", r.sample_count},
         {"mos",
          {{"srcc", r.mos.srcc}, {"plcc", r.mos.plcc}, {"rmse", r.mos.rmse}}}};
  if (r.dos) {
    j["dos"] = {{"jsd", r.dos->jsd},
                {"emd", r.dos->emd},
                {"rmse", r.dos->rmse},
                {"intersection", r.dos->intersection},
                {"cosine", r.dos->cosine}};
  }
  return j;
}

// Mean over per-split results. DOS columns appear only when every split
// carries them.
inline json mean_results_json(const std::vector<SplitEvalResult>& results) {
  require(!results.empty(), ErrorKind::NoResults, "no split results");
  double srcc_sum = 0.0, plcc_sum = 0.0, rmse_sum = 0.0;
  bool all_dos = true;
  DosEvalReport dos_sum;
  for (const SplitEvalResult& r : results) {
    srcc_sum += r.mos.srcc;
    plcc_sum += r.mos.plcc;
    rmse_sum += r.mos.rmse;
    if (r.dos) {
      dos_sum.jsd += r.dos->jsd;
      dos_sum.emd += r.dos->emd;
      dos_sum.rmse += r.dos->rmse;
      dos_sum.intersection += r.dos->intersection;
      dos_sum.cosine += r.dos->cosine;
    } else {
      all_dos = false;
    }
  }
  const double inv = 1.0 / static_cast<double>(results.size());
  json j{{"split_id", "mean"},
         {"num_splits", results.size()},
         {"mos",
          {{"srcc", srcc_sum * inv},
           {"plcc", plcc_sum * inv},
           {"rmse", rmse_sum * inv}}}};
  if (all_dos) {
    j["dos"] = {{"jsd", dos_sum.jsd * inv},
                {"emd", dos_sum.emd * inv},
                {"rmse", dos_sum.rmse * inv},
                {"intersection", dos_sum.intersection * inv},
                {"cosine", dos_sum.cosine * inv}};
  }
  return j;
}

}  // namespace opiq

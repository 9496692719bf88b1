// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// Multi-label training losses and the label router that turns whatever a
// database provides (DOS / MOS+SOS / MOS) into one common training target.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "opiq/autodiff.hpp"
#include "opiq/error.hpp"
#include "opiq/prediction.hpp"
#include "opiq/rating_stats.hpp"
#include "opiq/scale.hpp"

namespace opiq {

struct LossWeights {
  double alpha = 200.0;
  double beta = 10.0;
  double gamma = 1.0;
  bool emd_enabled = true;
  bool l1_enabled = true;
  bool esd_enabled = true;

  void validate() const {
    require(emd_enabled || l1_enabled || esd_enabled, ErrorKind::ConfigError,
            "at least one loss term must be enabled");
    require(alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0, ErrorKind::ConfigError,
            "loss weights must be non-negative");
  }
};

enum class TargetProvenance {
  GroundTruthDos,
  GaussianFromMosSos,
  GaussianFromMosOnly,
};

inline const char* target_provenance_name(TargetProvenance p) {
  switch (p) {
    case TargetProvenance::GroundTruthDos: return "GROUND_TRUTH_DOS";
    case TargetProvenance::GaussianFromMosSos: return "GAUSSIAN_FROM_MOS_SOS";
    case TargetProvenance::GaussianFromMosOnly: return "GAUSSIAN_FROM_MOS_ONLY";
  }
  return "Unknown";
}

struct TrainingTarget {
  OpinionDistribution dos_target;
  double mos_target = 0.0;
  double sos_reference = 0.0;  // always the expected dispersion from the mean
  TargetProvenance provenance = TargetProvenance::GroundTruthDos;
};

// Means exactly at the range endpoints have zero expected dispersion, which
// would make the Gaussian supplement degenerate; pull them just inside.
inline double clamp_mos_inside(double mos, const QualityScale& scale) {
  const double eps = 1e-3 * (scale.range_end() - scale.range_start());
  return std::clamp(mos, scale.range_start() + eps, scale.range_end() - eps);
}

// Build the training target for one sample. Databases with a ground-truth
// distribution pass it through; the others get a Gaussian supplement, with
// the dispersion taken from the labels when present and from the quadratic
// law otherwise.
inline TrainingTarget route_labels(const SampleLabels& labels,
                                   const QualityScale& scale, double a) {
  const double clamped = clamp_mos_inside(labels.mos, scale);
  const double sos_reference = expected_sos(clamped, scale, a);
  switch (labels.category) {
    case LabelCategory::DosAvailable: {
      require(labels.dos.has_value(), ErrorKind::InvalidLabels,
              "DOS category without a distribution");
      return TrainingTarget{*labels.dos, labels.mos, sos_reference,
                            TargetProvenance::GroundTruthDos};
    }
    case LabelCategory::MosSosAvailable: {
      require(labels.sos.has_value(), ErrorKind::InvalidLabels,
              "MOS+SOS category without a dispersion value");
      return TrainingTarget{gaussian_dos(labels.mos, *labels.sos, scale),
                            labels.mos, sos_reference,
                            TargetProvenance::GaussianFromMosSos};
    }
    case LabelCategory::MosOnly: {
      return TrainingTarget{gaussian_dos(clamped, sos_reference, scale),
                            labels.mos, sos_reference,
                            TargetProvenance::GaussianFromMosOnly};
    }
  }
  raise(ErrorKind::InvalidLabels, "unknown label category");
}

// Root-mean-square difference of the two cumulative distributions.
inline double emd_loss(const OpinionDistribution& pred,
                       const OpinionDistribution& target) {
  require(pred.num_levels() == target.num_levels(), ErrorKind::ScaleMismatch,
          "distributions live on different scales");
  const int c_levels = pred.num_levels();
  double cdf_pred = 0.0;
  double cdf_target = 0.0;
  double sum_sq = 0.0;
  for (int c = 0; c < c_levels; ++c) {
    cdf_pred += pred.prob(c);
    cdf_target += target.prob(c);
    const double d = cdf_target - cdf_pred;
    sum_sq += d * d;
  }
  return std::sqrt(sum_sq / static_cast<double>(c_levels));
}

inline double l1_loss(double mos_pred, double mos_target) {
  return std::abs(mos_target - mos_pred);
}

// Squared distance between the predicted dispersion and the dispersion
// expected from the mean.
inline double esd_loss(double sos_pred, double sos_reference) {
  const double d = sos_reference - sos_pred;
  return d * d;
}

struct LossBreakdown {
  double emd = 0.0;
  double l1 = 0.0;
  double esd = 0.0;
  double total = 0.0;
};

inline LossBreakdown loss_breakdown(const QualityPrediction& pred,
                                    const TrainingTarget& target,
                                    const LossWeights& weights) {
  weights.validate();
  LossBreakdown out;
  if (weights.emd_enabled) {
    out.emd = emd_loss(pred.d_p, target.dos_target);
    out.total += weights.alpha * out.emd;
  }
  if (weights.l1_enabled) {
    out.l1 = l1_loss(pred.mos_p, target.mos_target);
    out.total += weights.beta * out.l1;
  }
  if (weights.esd_enabled) {
    out.esd = esd_loss(pred.sos_p, target.sos_reference);
    out.total += weights.gamma * out.esd;
  }
  return out;
}

inline double total_loss(const QualityPrediction& pred,
                         const TrainingTarget& target,
                         const LossWeights& weights) {
  return loss_breakdown(pred, target, weights).total;
}

// Differentiable mirror of the losses above, built on an autodiff tape.
// Disabled terms are left out of the graph entirely.
struct LossVars {
  ad::Var total;
  ad::Var emd;
  ad::Var l1;
  ad::Var esd;
  bool has_emd = false;
  bool has_l1 = false;
  bool has_esd = false;
};

inline LossVars loss_graph(ad::Tape& tape, ad::Var d_p, ad::Var mos_p,
                           ad::Var sos_p, const TrainingTarget& target,
                           const LossWeights& weights) {
  weights.validate();
  const int c_levels = target.dos_target.num_levels();
  require(tape.rows(d_p) == c_levels && tape.cols(d_p) == 1,
          ErrorKind::ScaleMismatch,
          "predicted distribution does not match the target scale");

  LossVars out;
  ad::Var total{};
  bool have_total = false;
  auto accumulate = [&](ad::Var term, double weight) {
    ad::Var weighted = tape.scale(term, weight);
    total = have_total ? tape.add(total, weighted) : weighted;
    have_total = true;
  };

  if (weights.emd_enabled) {
    ad::Mat cdf_target(c_levels, 1);
    double acc = 0.0;
    for (int c = 0; c < c_levels; ++c) {
      acc += target.dos_target.prob(c);
      cdf_target(c, 0) = acc;
    }
    ad::Var diff = tape.sub(tape.constant(cdf_target), tape.cumsum(d_p));
    ad::Var mean_sq = tape.scale(tape.sum_all(tape.hadamard(diff, diff)),
                                 1.0 / static_cast<double>(c_levels));
    out.emd = tape.sqrt_op(mean_sq);
    out.has_emd = true;
    accumulate(out.emd, weights.alpha);
  }
  if (weights.l1_enabled) {
    ad::Mat target_mos(1, 1);
    target_mos(0, 0) = target.mos_target;
    out.l1 = tape.abs_op(tape.sub(tape.constant(target_mos), mos_p));
    out.has_l1 = true;
    accumulate(out.l1, weights.beta);
  }
  if (weights.esd_enabled) {
    ad::Mat reference(1, 1);
    reference(0, 0) = target.sos_reference;
    ad::Var diff = tape.sub(tape.constant(reference), sos_p);
    out.esd = tape.hadamard(diff, diff);
    out.has_esd = true;
    accumulate(out.esd, weights.gamma);
  }
  out.total = total;
  return out;
}

}  // namespace opiq

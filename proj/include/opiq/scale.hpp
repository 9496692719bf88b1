// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// Discrete opinion-score domain: quality scales, opinion distributions, and
// the per-image subjective labels a dataset can provide.

#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "opiq/error.hpp"

namespace opiq {

// The discrete label axis: C quality levels with scores s_1 < ... < s_C
// spanning the rating range [range_start, range_end].
class QualityScale {
 public:
  QualityScale(std::vector<double> scores, double range_start, double range_end)
      : scores_(std::move(scores)),
        range_start_(range_start),
        range_end_(range_end) {
    require(scores_.size() >= 2, ErrorKind::InvalidScale,
            "a quality scale needs at least 2 levels");
    require(range_start_ < range_end_, ErrorKind::InvalidScale,
            "range_start must be below range_end");
    for (std::size_t c = 0; c < scores_.size(); ++c) {
      require(std::isfinite(scores_[c]), ErrorKind::InvalidScale,
              "non-finite level score");
      require(scores_[c] >= range_start_ && scores_[c] <= range_end_,
              ErrorKind::InvalidScale,
              "level score outside the rating range");
      if (c > 0) {
        require(scores_[c] > scores_[c - 1], ErrorKind::InvalidScale,
                "level scores must be strictly increasing");
      }
    }
  }

  // C levels evenly spaced over [start, end], endpoints included.
  // evenly_spaced(5, 1, 5) gives scores {1,2,3,4,5}.
  static QualityScale evenly_spaced(int levels, double start, double end) {
    require(levels >= 2, ErrorKind::InvalidScale, "need at least 2 levels");
    std::vector<double> scores(static_cast<std::size_t>(levels));
    for (int c = 0; c < levels; ++c) {
      scores[static_cast<std::size_t>(c)] =
          start + (end - start) * static_cast<double>(c) /
                      static_cast<double>(levels - 1);
    }
    return QualityScale(std::move(scores), start, end);
  }

  int num_levels() const { return static_cast<int>(scores_.size()); }
  const std::vector<double>& scores() const { return scores_; }
  double score(int level) const {
    return scores_[static_cast<std::size_t>(level)];
  }
  double range_start() const { return range_start_; }
  double range_end() const { return range_end_; }

  bool operator==(const QualityScale& other) const {
    return scores_ == other.scores_ && range_start_ == other.range_start_ &&
           range_end_ == other.range_end_;
  }

 private:
  std::vector<double> scores_;
  double range_start_;
  double range_end_;
};

// A distribution of opinion scores over the levels of one QualityScale:
// non-negative probabilities summing to 1.
class OpinionDistribution {
 public:
  static constexpr double kSumTolerance = 1e-9;

  OpinionDistribution(std::vector<double> probs, QualityScale scale)
      : probs_(std::move(probs)), scale_(std::move(scale)) {
    validate(kSumTolerance);
  }

  // Accepts probabilities whose sum is within `tolerance` of 1 (e.g. dataset
  // files rounded to a few decimals) and renormalizes exactly.
  static OpinionDistribution renormalized(std::vector<double> probs,
                                          QualityScale scale,
                                          double tolerance = 1e-6) {
    double sum = 0.0;
    for (double p : probs) sum += p;
    require(std::isfinite(sum) && std::abs(sum - 1.0) <= tolerance,
            ErrorKind::InvalidDistribution,
            "probabilities sum to " + std::to_string(sum) +
                ", outside tolerance " + std::to_string(tolerance));
    require(sum > 0.0, ErrorKind::InvalidDistribution, "zero-mass distribution");
    for (double& p : probs) p /= sum;
    return OpinionDistribution(std::move(probs), std::move(scale));
  }

  const std::vector<double>& probs() const { return probs_; }
  double prob(int level) const {
    return probs_[static_cast<std::size_t>(level)];
  }
  const QualityScale& scale() const { return scale_; }
  int num_levels() const { return scale_.num_levels(); }

 private:
  void validate(double tolerance) const {
    require(static_cast<int>(probs_.size()) == scale_.num_levels(),
            ErrorKind::InvalidDistribution,
            "probability vector length does not match the scale");
    double sum = 0.0;
    for (double p : probs_) {
      require(std::isfinite(p) && p >= 0.0 && p <= 1.0,
              ErrorKind::InvalidDistribution,
              "probability outside [0, 1]");
      sum += p;
    }
    require(std::abs(sum - 1.0) <= tolerance, ErrorKind::InvalidDistribution,
            "probabilities sum to " + std::to_string(sum));
  }

  std::vector<double> probs_;
  QualityScale scale_;
};

// Which subjective labels a database exposes.
enum class LabelCategory { DosAvailable, MosSosAvailable, MosOnly };

inline const char* label_category_name(LabelCategory c) {
  switch (c) {
    case LabelCategory::DosAvailable: return "DOS_AVAILABLE";
    case LabelCategory::MosSosAvailable: return "MOS_SOS_AVAILABLE";
    case LabelCategory::MosOnly: return "MOS_ONLY";
  }
  return "Unknown";
}

inline LabelCategory label_category_from_name(const std::string& name) {
  if (name == "DOS_AVAILABLE") return LabelCategory::DosAvailable;
  if (name == "MOS_SOS_AVAILABLE") return LabelCategory::MosSosAvailable;
  if (name == "MOS_ONLY") return LabelCategory::MosOnly;
  raise(ErrorKind::ParseError, "unknown label category '" + name + "'");
}

// Ground truth for one image. The category invariant is enforced at
// construction: DOS implies a distribution, MOS+SOS implies a dispersion
// value, MOS-only implies neither.
struct SampleLabels {
  double mos = 0.0;
  std::optional<double> sos;
  std::optional<OpinionDistribution> dos;
  LabelCategory category = LabelCategory::MosOnly;

  static SampleLabels with_mos(double mos, const QualityScale& scale) {
    check_mos_range(mos, scale);
    SampleLabels labels;
    labels.mos = mos;
    labels.category = LabelCategory::MosOnly;
    return labels;
  }

  static SampleLabels with_mos_sos(double mos, double sos,
                                   const QualityScale& scale) {
    check_mos_range(mos, scale);
    require(std::isfinite(sos) && sos >= 0.0, ErrorKind::InvalidLabels,
            "SOS must be a non-negative real");
    SampleLabels labels;
    labels.mos = mos;
    labels.sos = sos;
    labels.category = LabelCategory::MosSosAvailable;
    return labels;
  }

  // mos must equal the distribution's mean within 1e-6.
  static SampleLabels with_dos(double mos, OpinionDistribution dos);

 private:
  static void check_mos_range(double mos, const QualityScale& scale) {
    require(std::isfinite(mos) && mos >= scale.range_start() &&
                mos <= scale.range_end(),
            ErrorKind::InvalidLabels, "MOS outside the rating range");
  }
};

}  // namespace opiq

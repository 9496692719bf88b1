// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// Subjective-rating mathematics: histogram and Gaussian construction of
// opinion-score distributions, their mean/dispersion readouts, and the
// quadratic dispersion-vs-mean law with its one-parameter fit.

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "opiq/error.hpp"
#include "opiq/scale.hpp"

namespace opiq {

// Empirical histogram over levels. Ratings are 1-based level indices.
inline OpinionDistribution dos_from_ratings(const std::vector<int>& ratings,
                                            const QualityScale& scale) {
  require(!ratings.empty(), ErrorKind::EmptyRatings,
          "cannot build a distribution from zero ratings");
  std::vector<double> probs(static_cast<std::size_t>(scale.num_levels()), 0.0);
  for (int r : ratings) {
    require(r >= 1 && r <= scale.num_levels(), ErrorKind::InvalidLevel,
            "rating level " + std::to_string(r) + " outside 1.." +
                std::to_string(scale.num_levels()));
    probs[static_cast<std::size_t>(r - 1)] += 1.0;
  }
  const double n = static_cast<double>(ratings.size());
  for (double& p : probs) p /= n;
  return OpinionDistribution(std::move(probs), scale);
}

// Mean opinion score of a distribution.
inline double mos_of(const OpinionDistribution& dos) {
  double mean = 0.0;
  for (int c = 0; c < dos.num_levels(); ++c) {
    mean += dos.scale().score(c) * dos.prob(c);
  }
  return mean;
}

// Standard deviation of opinion scores of a distribution.
inline double sos_of(const OpinionDistribution& dos) {
  const double mean = mos_of(dos);
  double var = 0.0;
  for (int c = 0; c < dos.num_levels(); ++c) {
    const double d = dos.scale().score(c) - mean;
    var += dos.prob(c) * d * d;
  }
  return std::sqrt(var);
}

// The quadratic factor (mos - S_start) * (S_end - mos). Zero exactly at both
// endpoints, maximal at the midpoint.
inline double dispersion_quadratic(double mos, const QualityScale& scale) {
  return (mos - scale.range_start()) * (scale.range_end() - mos);
}

// Dispersion expected from the mean alone: sos^2 = a * q(mos).
inline double expected_sos(double mos, const QualityScale& scale, double a) {
  require(std::isfinite(a) && a > 0.0, ErrorKind::ConfigError,
          "dispersion coefficient a must be positive");
  require(std::isfinite(mos) && mos >= scale.range_start() &&
              mos <= scale.range_end(),
          ErrorKind::OutOfRange,
          "MOS " + std::to_string(mos) + " outside [" +
              std::to_string(scale.range_start()) + ", " +
              std::to_string(scale.range_end()) + "]");
  return std::sqrt(a * dispersion_quadratic(mos, scale));
}

// Least-squares estimate of the dispersion coefficient from (mos, sos)
// pairs: regress sos^2 on q(mos) through the origin, a = sum(sos^2 q) / sum(q^2).
inline double fit_a(const std::vector<std::pair<double, double>>& samples,
                    const QualityScale& scale) {
  require(samples.size() >= 2, ErrorKind::ConfigError,
          "fitting a needs at least 2 (mos, sos) samples");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& [mos, sos] = samples[i];
    require(mos > scale.range_start() && mos < scale.range_end(),
            ErrorKind::OutOfRange,
            "sample " + std::to_string(i) +
                ": MOS must lie strictly inside the rating range");
    const double q = dispersion_quadratic(mos, scale);
    num += sos * sos * q;
    den += q * q;
  }
  require(den > 0.0, ErrorKind::DegenerateFit,
          "all quadratic factors vanish; a is unidentifiable");
  return num / den;
}

// Discretized Gaussian distribution: evaluate the density at each level
// score and renormalize to unit mass.
inline OpinionDistribution gaussian_dos(double mos, double sos,
                                        const QualityScale& scale) {
  require(std::isfinite(sos) && sos > 0.0, ErrorKind::InvalidSigma,
          "sigma must be positive");
  require(std::isfinite(mos) && mos >= scale.range_start() &&
              mos <= scale.range_end(),
          ErrorKind::OutOfRange, "MOS outside the rating range");
  std::vector<double> probs(static_cast<std::size_t>(scale.num_levels()));
  const double inv_two_var = 1.0 / (2.0 * sos * sos);
  double sum = 0.0;
  for (int c = 0; c < scale.num_levels(); ++c) {
    const double d = scale.score(c) - mos;
    probs[static_cast<std::size_t>(c)] = std::exp(-d * d * inv_two_var);
    sum += probs[static_cast<std::size_t>(c)];
  }
  require(sum > 0.0 && std::isfinite(sum), ErrorKind::NumericError,
          "Gaussian mass underflowed to zero");
  for (double& p : probs) p /= sum;
  return OpinionDistribution(std::move(probs), scale);
}

inline SampleLabels SampleLabels::with_dos(double mos, OpinionDistribution dos) {
  require(std::abs(mos - mos_of(dos)) <= 1e-6, ErrorKind::InvalidLabels,
          "MOS does not match the mean of the provided distribution");
  SampleLabels labels;
  labels.mos = mos;
  labels.dos = std::move(dos);
  labels.category = LabelCategory::DosAvailable;
  return labels;
}

}  // namespace opiq

// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// Evaluation criteria. Scalar-score metrics (SRCC, PLCC and RMSE after a
// four-parameter logistic remap) and distribution metrics (JSD, EMD, RMSE,
// intersection, cosine).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "opiq/error.hpp"
#include "opiq/losses.hpp"
#include "opiq/scale.hpp"

namespace opiq {

struct MosEvalReport {
  double srcc = 0.0;
  double plcc = 0.0;
  double rmse = 0.0;                       // on logistically mapped predictions
  std::array<double, 4> logistic_params{};  // beta_1..beta_4
  bool logistic_converged = false;
};

struct DosEvalReport {
  double jsd = 0.0;
  double emd = 0.0;
  double rmse = 0.0;
  double intersection = 0.0;
  double cosine = 0.0;
};

namespace detail {

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  require(sxx > 0.0 && syy > 0.0, ErrorKind::UndefinedCorrelation,
          "correlation is undefined for a constant sequence");
  return sxy / std::sqrt(sxx * syy);
}

// Ranks with ties replaced by the average rank of the tied block.
inline std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double cosine_similarity(std::span<const double> a,
                                std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  require(na > 0.0 && nb > 0.0, ErrorKind::InvalidDistribution,
          "cosine of a zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace detail

// Spearman rank-order correlation with average ranks for ties.
inline double srcc(std::span<const double> pred, std::span<const double> gt) {
  require(pred.size() == gt.size(), ErrorKind::ConfigError,
          "SRCC needs sequences of equal length");
  require(pred.size() >= 3, ErrorKind::ConfigError,
          "SRCC needs at least 3 samples");
  const auto rp = detail::average_ranks(pred);
  const auto rg = detail::average_ranks(gt);
  return detail::pearson(rp, rg);
}

// Monotone four-parameter logistic remap fitted by damped Gauss-Newton
// (Levenberg-Marquardt) from deterministic starting points.
struct LogisticFit {
  std::array<double, 4> beta{};
  bool converged = false;
  double sse = std::numeric_limits<double>::infinity();

  double map(double x) const {
    const double u = (x - beta[2]) / beta[3];
    return (beta[0] - beta[1]) / (1.0 + std::exp(-u)) + beta[1];
  }
};

namespace detail {

inline double logistic_sse(const std::array<double, 4>& beta,
                           std::span<const double> pred,
                           std::span<const double> gt) {
  LogisticFit f;
  f.beta = beta;
  double sse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = f.map(pred[i]) - gt[i];
    sse += r * r;
  }
  return sse;
}

// One Levenberg-Marquardt run with a fixed iteration budget. Returns the
// best iterate; `converged` reflects whether the step size collapsed.
inline LogisticFit levenberg_marquardt(std::array<double, 4> beta,
                                       std::span<const double> pred,
                                       std::span<const double> gt,
                                       int max_iters = 200) {
  const std::size_t n = pred.size();
  double lambda = 1e-3;
  double sse = logistic_sse(beta, pred, gt);
  bool converged = false;

  for (int iter = 0; iter < max_iters; ++iter) {
    // Normal equations J^T J + lambda diag, J^T r for the 4 parameters.
    std::array<std::array<double, 4>, 4> jtj{};
    std::array<double, 4> jtr{};
    for (std::size_t i = 0; i < n; ++i) {
      const double b4 = beta[3];
      const double u = (pred[i] - beta[2]) / b4;
      const double s = 1.0 / (1.0 + std::exp(-u));
      const double amp = beta[0] - beta[1];
      const double f = amp * s + beta[1];
      const double r = f - gt[i];
      const std::array<double, 4> j = {
          s,
          1.0 - s,
          -amp * s * (1.0 - s) / b4,
          -amp * s * (1.0 - s) * u / b4,
      };
      for (int a = 0; a < 4; ++a) {
        jtr[a] += j[a] * r;
        for (int b = 0; b < 4; ++b) jtj[a][b] += j[a] * j[b];
      }
    }

    bool improved = false;
    for (int attempt = 0; attempt < 8; ++attempt) {
      std::array<std::array<double, 4>, 4> m = jtj;
      for (int a = 0; a < 4; ++a) m[a][a] += lambda * (jtj[a][a] + 1e-12);
      // Solve m * step = jtr by Gaussian elimination with partial pivoting.
      std::array<double, 4> rhs = jtr;
      std::array<int, 4> piv = {0, 1, 2, 3};
      bool singular = false;
      for (int col = 0; col < 4 && !singular; ++col) {
        int best = col;
        for (int row = col + 1; row < 4; ++row) {
          if (std::abs(m[piv[row]][col]) > std::abs(m[piv[best]][col])) best = row;
        }
        std::swap(piv[col], piv[best]);
        const double d = m[piv[col]][col];
        if (std::abs(d) < 1e-300) {
          singular = true;
          break;
        }
        for (int row = col + 1; row < 4; ++row) {
          const double factor = m[piv[row]][col] / d;
          for (int k = col; k < 4; ++k) m[piv[row]][k] -= factor * m[piv[col]][k];
          rhs[piv[row]] -= factor * rhs[piv[col]];
        }
      }
      std::array<double, 4> step{};
      if (!singular) {
        for (int col = 3; col >= 0; --col) {
          double v = rhs[piv[col]];
          for (int k = col + 1; k < 4; ++k) v -= m[piv[col]][k] * step[k];
          step[col] = v / m[piv[col]][col];
        }
      }
      std::array<double, 4> candidate = beta;
      bool finite = !singular;
      for (int a = 0; a < 4 && finite; ++a) {
        candidate[a] -= step[a];
        finite = std::isfinite(candidate[a]);
      }
      // beta_4 = 0 collapses the model; step over it.
      if (finite && std::abs(candidate[3]) < 1e-12) finite = false;
      const double cand_sse =
          finite ? logistic_sse(candidate, pred, gt)
                 : std::numeric_limits<double>::infinity();
      if (cand_sse <= sse) {
        double step_norm = 0.0;
        for (int a = 0; a < 4; ++a) step_norm += step[a] * step[a];
        if (sse - cand_sse <= 1e-14 * (1.0 + sse) && step_norm < 1e-16) {
          converged = true;
        }
        beta = candidate;
        sse = cand_sse;
        lambda = std::max(lambda * 0.5, 1e-12);
        improved = true;
        break;
      }
      lambda *= 8.0;
    }
    if (!improved) {
      converged = true;  // no descent direction left at any damping
      break;
    }
    if (converged) break;
  }

  LogisticFit out;
  out.beta = beta;
  out.converged = converged;
  out.sse = sse;
  return out;
}

}  // namespace detail

// Fit the logistic remap. Runs from the standard initialization, from its
// slope-reversed twin, and from a near-affine embedding of the least-squares
// line, keeping the best; this guarantees the fit is never worse than the
// affine baseline. Never throws past precondition checks: a fit that hits
// the iteration budget returns the best iterate with converged=false.
inline LogisticFit fit_logistic(std::span<const double> pred,
                                std::span<const double> gt) {
  require(pred.size() == gt.size(), ErrorKind::ConfigError,
          "logistic fit needs sequences of equal length");
  require(pred.size() >= 5, ErrorKind::ConfigError,
          "logistic fit needs at least 5 samples");
  const std::size_t n = pred.size();
  double pmin = pred[0], pmax = pred[0], pmean = 0.0;
  double gmin = gt[0], gmax = gt[0], gmean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    pmin = std::min(pmin, pred[i]);
    pmax = std::max(pmax, pred[i]);
    pmean += pred[i];
    gmin = std::min(gmin, gt[i]);
    gmax = std::max(gmax, gt[i]);
    gmean += gt[i];
  }
  pmean /= static_cast<double>(n);
  gmean /= static_cast<double>(n);
  require(pmax > pmin, ErrorKind::UndefinedCorrelation,
          "logistic fit is undefined for constant predictions");
  double pvar = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    pvar += (pred[i] - pmean) * (pred[i] - pmean);
  }
  const double pstd = std::sqrt(pvar / static_cast<double>(n));

  std::vector<std::array<double, 4>> starts;
  starts.push_back({gmax, gmin, pmean, pstd});
  starts.push_back({gmax, gmin, pmean, -pstd});

  // Least-squares affine baseline gt ~ slope*pred + intercept, embedded as a
  // logistic that is linear to O(1/K^2) over the data range.
  {
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sxx += (pred[i] - pmean) * (pred[i] - pmean);
      sxy += (pred[i] - pmean) * (gt[i] - gmean);
    }
    const double slope = sxy / sxx;
    const double intercept = gmean - slope * pmean;
    const double k_wide = 1e6 * std::max(pmax - pmin, 1e-9);
    const double mid = slope * pmean + intercept;
    starts.push_back(
        {mid + 2.0 * k_wide * slope, mid - 2.0 * k_wide * slope, pmean, k_wide});
  }

  LogisticFit best;
  for (const auto& s : starts) {
    const LogisticFit fit = detail::levenberg_marquardt(s, pred, gt);
    if (fit.sse < best.sse) best = fit;
  }
  return best;
}

// Pearson correlation and RMSE of the logistically remapped predictions.
inline std::pair<double, double> plcc_rmse(std::span<const double> pred,
                                           std::span<const double> gt) {
  const LogisticFit fit = fit_logistic(pred, gt);
  std::vector<double> mapped(pred.size());
  double sse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    mapped[i] = fit.map(pred[i]);
    const double r = mapped[i] - gt[i];
    sse += r * r;
  }
  const double plcc = detail::pearson(mapped, gt);
  const double rmse = std::sqrt(sse / static_cast<double>(pred.size()));
  return {plcc, rmse};
}

inline MosEvalReport mos_eval(std::span<const double> pred,
                              std::span<const double> gt) {
  MosEvalReport report;
  report.srcc = srcc(pred, gt);
  const LogisticFit fit = fit_logistic(pred, gt);
  std::vector<double> mapped(pred.size());
  double sse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    mapped[i] = fit.map(pred[i]);
    const double r = mapped[i] - gt[i];
    sse += r * r;
  }
  report.plcc = detail::pearson(mapped, gt);
  report.rmse = std::sqrt(sse / static_cast<double>(pred.size()));
  report.logistic_params = fit.beta;
  report.logistic_converged = fit.converged;
  return report;
}

// All five distribution criteria for one prediction/ground-truth pair.
// JSD uses base-2 logarithms so disjoint supports score exactly 1; EMD is
// the same computation as the training loss.
inline DosEvalReport dos_metrics(const OpinionDistribution& pred,
                                 const OpinionDistribution& gt) {
  require(pred.num_levels() == gt.num_levels() && pred.scale() == gt.scale(),
          ErrorKind::ScaleMismatch, "distributions live on different scales");
  DosEvalReport report;
  report.emd = emd_loss(pred, gt);

  double js_div = 0.0;
  double sq = 0.0;
  double inter = 0.0;
  for (int c = 0; c < pred.num_levels(); ++c) {
    const double p = pred.prob(c);
    const double q = gt.prob(c);
    const double m = 0.5 * (p + q);
    if (p > 0.0) js_div += 0.5 * p * std::log2(p / m);
    if (q > 0.0) js_div += 0.5 * q * std::log2(q / m);
    const double d = p - q;
    sq += d * d;
    inter += std::min(p, q);
  }
  report.jsd = std::sqrt(std::max(js_div, 0.0));
  report.rmse = std::sqrt(sq / static_cast<double>(pred.num_levels()));
  report.intersection = inter;
  report.cosine = detail::cosine_similarity(pred.probs(), gt.probs());
  return report;
}

}  // namespace opiq

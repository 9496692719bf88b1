// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// Adaptive-moment optimizer and the training loop: per-sample forward and
// backward passes, batch-averaged gradients, per-epoch loss logging, and a
// hard abort on the first non-finite loss.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "opiq/autodiff.hpp"
#include "opiq/config.hpp"
#include "opiq/error.hpp"
#include "opiq/image.hpp"
#include "opiq/losses.hpp"
#include "opiq/manifest.hpp"
#include "opiq/network.hpp"
#include "opiq/rng.hpp"

namespace opiq {

class Adam {
 public:
  Adam(std::vector<ad::Parameter*> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
        eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const ad::Parameter* p : params_) {
      m_.push_back(ad::Mat::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(ad::Mat::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void step() {
    ++t_;
    const double bias1 = 1.0 - std::pow(beta1_, t_);
    const double bias2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      ad::Parameter& p = *params_[i];
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
      const ad::Mat m_hat = m_[i] / bias1;
      const ad::Mat v_hat = v_[i] / bias2;
      p.value.array() -=
          lr_ * m_hat.array() / (v_hat.array().sqrt() + eps_);
    }
  }

  void zero_grad() {
    for (ad::Parameter* p : params_) p->zero_grad();
  }

 private:
  std::vector<ad::Parameter*> params_;
  double lr_, beta1_, beta2_, eps_;
  std::vector<ad::Mat> m_;
  std::vector<ad::Mat> v_;
  int t_ = 0;
};

struct EpochLoss {
  int epoch = 0;
  double total = 0.0;
  double emd = 0.0;
  double l1 = 0.0;
  double esd = 0.0;
};

// Route every sample's labels once, up front.
inline std::vector<TrainingTarget> build_targets(
    const DatasetManifest& manifest, const std::vector<int>& indices,
    double a) {
  std::vector<TrainingTarget> targets;
  targets.reserve(indices.size());
  for (int idx : indices) {
    targets.push_back(route_labels(
        manifest.labels_for(static_cast<std::size_t>(idx)), manifest.scale, a));
  }
  return targets;
}

// Train on the given subset. Images are re-read and re-cropped every epoch;
// batch gradients are averaged. Returns the per-epoch mean losses.
inline std::vector<EpochLoss> train_model(Model& model,
                                          const DatasetManifest& manifest,
                                          const std::vector<int>& train_indices,
                                          const RunConfig& config) {
  config.validate();
  require(!train_indices.empty(), ErrorKind::ConfigError,
          "empty training subset");
  const std::vector<TrainingTarget> targets =
      build_targets(manifest, train_indices, config.a);

  Adam optimizer(model.parameters(), config.optimizer.lr);
  Rng shuffle_rng = Rng::substream(config.seed, 0xe70c);
  Rng crop_rng = Rng::substream(config.seed, 0xc209);
  const PreprocessSpec prep = model.backbone_contract().preprocess;

  std::vector<EpochLoss> log;
  log.reserve(static_cast<std::size_t>(config.epochs));
  std::vector<std::size_t> order(train_indices.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    EpochLoss epoch_loss;
    epoch_loss.epoch = epoch;
    int batch_in_epoch = 0;

    std::size_t pos = 0;
    while (pos < order.size()) {
      const std::size_t batch_end =
          std::min(pos + static_cast<std::size_t>(config.batch_size),
                   order.size());
      const int batch_n = static_cast<int>(batch_end - pos);
      optimizer.zero_grad();

      for (std::size_t b = pos; b < batch_end; ++b) {
        const std::size_t sample = order[b];
        const int entry_index = train_indices[sample];
        const Image raw = read_ppm(
            manifest.resolve_image_path(static_cast<std::size_t>(entry_index)));
        const Image input = preprocess(raw, prep, /*train_mode=*/true, crop_rng);

        ad::Tape tape;
        SlmNetwork::PredictVars pred;
        try {
          pred = model.forward_graph(tape, input);
        } catch (const Error& e) {
          if (e.kind() == ErrorKind::NumericError) {
            raise(ErrorKind::NumericError,
                  std::string("epoch ") + std::to_string(epoch) + ", batch " +
                      std::to_string(batch_in_epoch) + ", entry " +
                      std::to_string(entry_index) + ": " + e.what());
          }
          throw;
        }
        const LossVars loss = loss_graph(tape, pred.d_p, pred.mos_p,
                                         pred.sos_p, targets[sample],
                                         config.weights);

        auto check_finite = [&](double v, const char* component) {
          if (!std::isfinite(v)) {
            raise(ErrorKind::NumericError,
                  std::string("non-finite ") + component + " loss at epoch " +
                      std::to_string(epoch) + ", batch " +
                      std::to_string(batch_in_epoch) + ", entry " +
                      std::to_string(entry_index));
          }
        };
        const double emd_v = loss.has_emd ? tape.value(loss.emd)(0, 0) : 0.0;
        const double l1_v = loss.has_l1 ? tape.value(loss.l1)(0, 0) : 0.0;
        const double esd_v = loss.has_esd ? tape.value(loss.esd)(0, 0) : 0.0;
        if (loss.has_emd) check_finite(emd_v, "EMD");
        if (loss.has_l1) check_finite(l1_v, "L1");
        if (loss.has_esd) check_finite(esd_v, "ESD");
        const double total_v = tape.value(loss.total)(0, 0);
        check_finite(total_v, "total");

        tape.backward(loss.total);
        epoch_loss.total += total_v;
        epoch_loss.emd += emd_v;
        epoch_loss.l1 += l1_v;
        epoch_loss.esd += esd_v;
      }

      for (ad::Parameter* p : model.parameters()) {
        p->grad /= static_cast<double>(batch_n);
        if (!p->grad.allFinite()) {
          raise(ErrorKind::NumericError,
                "non-finite gradient for " + p->name + " at epoch " +
                    std::to_string(epoch) + ", batch " +
                    std::to_string(batch_in_epoch));
        }
      }
      optimizer.step();

      pos = batch_end;
      ++batch_in_epoch;
    }

    const double inv_n = 1.0 / static_cast<double>(order.size());
    epoch_loss.total *= inv_n;
    epoch_loss.emd *= inv_n;
    epoch_loss.l1 *= inv_n;
    epoch_loss.esd *= inv_n;
    log.push_back(epoch_loss);
  }
  return log;
}

}  // namespace opiq

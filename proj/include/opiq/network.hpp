// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// The quality prediction network. A mask MLP and a projection build
// per-level attention features (short-term memory); a gated relational
// refinement over label-space and feature-space Gram graphs builds the
// long-term memory; two heads emit the memory and algorithmic opinion
// distributions, mixed into the final prediction.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "opiq/autodiff.hpp"
#include "opiq/backbone.hpp"
#include "opiq/error.hpp"
#include "opiq/prediction.hpp"
#include "opiq/rating_stats.hpp"
#include "opiq/rng.hpp"
#include "opiq/scale.hpp"

namespace opiq {

struct SlmConfig {
  int num_levels = 5;        // C
  int hidden_channels = 256; // C'
  double lambda_mix = 0.999; // weight of the memory branch in the mixture
  bool enable_direct_pathway = true;
  bool enable_indirect_pathway = true;

  bool memory_branch_enabled() const {
    return enable_direct_pathway || enable_indirect_pathway;
  }

  void validate() const {
    require(num_levels >= 2, ErrorKind::ConfigError,
            "need at least 2 quality levels");
    require(hidden_channels >= 1, ErrorKind::ConfigError,
            "hidden channel count must be positive");
    require(lambda_mix >= 0.0 && lambda_mix <= 1.0, ErrorKind::ConfigError,
            "lambda must lie in [0, 1]");
    if (lambda_mix == 1.0) {
      require(memory_branch_enabled(), ErrorKind::ConfigError,
              "lambda = 1 puts all weight on the memory branch, but both "
              "pathways are disabled");
    }
  }
};

// Memory module plus prediction heads operating on a fused feature vector.
class SlmNetwork {
 public:
  struct ShortTermVars {
    ad::Var af;  // attention features, C' x C
    ad::Var s;   // short-term memory, C' x C
  };

  struct PredictVars {
    ad::Var d_mem;
    ad::Var d_alg;
    ad::Var d_p;
    ad::Var mos_p;  // 1x1
    ad::Var sos_p;  // 1x1
  };

  SlmNetwork(SlmConfig config, int fused_dim, std::uint64_t seed)
      : cfg_(config), fused_dim_(fused_dim) {
    cfg_.validate();
    require(fused_dim_ >= 1, ErrorKind::ConfigError,
            "fused feature dimension must be positive");
    Rng rng = Rng::substream(seed, 0x51a7);
    const int c = cfg_.num_levels;
    const int h = cfg_.hidden_channels;
    using detail::fan_in_init;
    mask_w1_ = ad::Parameter("slm.mask.w1", fan_in_init(h, fused_dim_, rng));
    mask_b1_ = ad::Parameter("slm.mask.b1", ad::Mat::Zero(h, 1));
    mask_w2_ = ad::Parameter("slm.mask.w2", fan_in_init(c, h, rng));
    mask_b2_ = ad::Parameter("slm.mask.b2", ad::Mat::Zero(c, 1));
    proj_w_ = ad::Parameter("slm.proj.w", fan_in_init(h, fused_dim_, rng));
    proj_b_ = ad::Parameter("slm.proj.b", ad::Mat::Zero(h, 1));
    fuse_w_ = ad::Parameter("slm.fuse.w", fan_in_init(h, 2 * h, rng));
    fuse_b_ = ad::Parameter("slm.fuse.b", ad::Mat::Zero(h, 1));
    graph_label_w_ = ad::Parameter("slm.graph.label.w", fan_in_init(c, c, rng));
    graph_feat_w_ = ad::Parameter("slm.graph.feat.w", fan_in_init(h, h, rng));
    // Gates start closed: the first refinement pass is the identity.
    gate_label_w_ = ad::Parameter("slm.gate.label.w", ad::Mat::Zero(c, 2 * c));
    gate_feat_w_ = ad::Parameter("slm.gate.feat.w", ad::Mat::Zero(h, 2 * h));
    alg_w2_ = ad::Parameter("head.alg.w2", fan_in_init(h, fused_dim_, rng));
    alg_b2_ = ad::Parameter("head.alg.b2", ad::Mat::Zero(h, 1));
    alg_w1_ = ad::Parameter("head.alg.w1", fan_in_init(c, h, rng));
    alg_b1_ = ad::Parameter("head.alg.b1", ad::Mat::Zero(c, 1));
  }

  const SlmConfig& config() const { return cfg_; }
  int fused_dim() const { return fused_dim_; }

  // Mask MLP, projection, outer product, global semantics, and the fusing
  // projection. fused is (fused_dim x 1).
  ShortTermVars short_term_graph(ad::Tape& tape, ad::Var fused) const {
    check_fused(tape, fused);
    ad::Var hidden = tape.relu(tape.add(
        tape.matmul(tape.leaf(mask_w1_), fused), tape.leaf(mask_b1_)));
    ad::Var mask = tape.add(tape.matmul(tape.leaf(mask_w2_), hidden),
                            tape.leaf(mask_b2_));
    ad::Var p = tape.add(tape.matmul(tape.leaf(proj_w_), fused),
                         tape.leaf(proj_b_));
    ad::Var af = tape.matmul(p, mask, false, true);  // C' x C outer product
    ad::Var gs = tape.broadcast_cols(tape.relu(tape.rowwise_mean(af)),
                                     cfg_.num_levels);
    ad::Var s = tape.add_colvec(
        tape.matmul(tape.leaf(fuse_w_), tape.vconcat(af, gs)),
        tape.leaf(fuse_b_));
    return ShortTermVars{af, s};
  }

  // Two-pass gated refinement. Label-side objects live in C x C, feature-
  // side objects in C' x C'; each side is built from a row-normalized Gram
  // matrix passed through a learned linear map with tanh.
  ad::Var long_term_graph(ad::Tape& tape, ad::Var af, ad::Var s) const {
    require(tape.rows(af) == cfg_.hidden_channels &&
                tape.cols(af) == cfg_.num_levels &&
                tape.rows(s) == cfg_.hidden_channels &&
                tape.cols(s) == cfg_.num_levels,
            ErrorKind::ShapeError, "memory inputs must be C' x C");
    require(tape.value(af).allFinite() && tape.value(s).allFinite(),
            ErrorKind::NumericError, "non-finite memory inputs");

    ad::Var gram_label = tape.row_l2_normalize(tape.matmul(af, af, true, false));
    ad::Var gram_feat = tape.row_l2_normalize(tape.matmul(s, s, false, true));
    ad::Var adjacency0 = tape.tanh_op(
        tape.matmul(tape.leaf(graph_label_w_), gram_label));
    ad::Var weight0 = tape.tanh_op(
        tape.matmul(tape.leaf(graph_feat_w_), gram_feat));

    ad::Var gate_a = tape.tanh_op(tape.matmul(
        tape.leaf(gate_label_w_), tape.vconcat(adjacency0, gram_label)));
    ad::Var gate_w = tape.tanh_op(tape.matmul(
        tape.leaf(gate_feat_w_), tape.vconcat(weight0, gram_feat)));

    ad::Var y_af = tape.add(af, tape.matmul(af, tape.hadamard(gate_a, adjacency0)));
    ad::Var y_s = tape.add(s, tape.matmul(tape.hadamard(gate_w, weight0), s));

    ad::Var adjacency1 = tape.tanh_op(tape.matmul(
        tape.leaf(graph_label_w_),
        tape.row_l2_normalize(tape.matmul(y_af, y_af, true, false))));
    ad::Var weight1 = tape.tanh_op(tape.matmul(
        tape.leaf(graph_feat_w_),
        tape.row_l2_normalize(tape.matmul(y_s, y_s, false, true))));

    return tape.sigmoid(
        tape.matmul(tape.matmul(weight1, tape.add(af, s)), adjacency1));
  }

  ad::Var alg_head_graph(ad::Tape& tape, ad::Var fused) const {
    ad::Var inner = tape.add(tape.matmul(tape.leaf(alg_w2_), fused),
                             tape.leaf(alg_b2_));
    ad::Var logits = tape.add(tape.matmul(tape.leaf(alg_w1_), inner),
                              tape.leaf(alg_b1_));
    return tape.softmax(logits);
  }

  PredictVars predict_graph(ad::Tape& tape, ad::Var fused,
                            const QualityScale& scale) const {
    require(scale.num_levels() == cfg_.num_levels, ErrorKind::ConfigError,
            "scale has " + std::to_string(scale.num_levels()) +
                " levels but the network was built for " +
                std::to_string(cfg_.num_levels));
    check_fused(tape, fused);

    PredictVars out;
    out.d_alg = alg_head_graph(tape, fused);

    if (cfg_.memory_branch_enabled()) {
      const ShortTermVars st = short_term_graph(tape, fused);
      ad::Var memory{};
      if (cfg_.enable_direct_pathway && cfg_.enable_indirect_pathway) {
        memory = tape.add(st.af, long_term_graph(tape, st.af, st.s));
      } else if (cfg_.enable_indirect_pathway) {
        memory = long_term_graph(tape, st.af, st.s);
      } else {
        memory = st.af;
      }
      out.d_mem = tape.softmax(tape.colwise_mean(memory));
      const double lambda = cfg_.lambda_mix;
      out.d_p = tape.add(tape.scale(out.d_mem, lambda),
                         tape.scale(out.d_alg, 1.0 - lambda));
    } else {
      // No memory branch: the prediction is the algorithmic head alone.
      out.d_mem = out.d_alg;
      out.d_p = out.d_alg;
    }

    ad::Mat scores_row(1, cfg_.num_levels);
    ad::Mat scores_col(cfg_.num_levels, 1);
    for (int c = 0; c < cfg_.num_levels; ++c) {
      scores_row(0, c) = scale.score(c);
      scores_col(c, 0) = scale.score(c);
    }
    out.mos_p = tape.matmul(tape.constant(scores_row), out.d_p);
    ad::Var centered = tape.sub(
        tape.constant(scores_col),
        tape.scalar_times(out.mos_p, ad::Mat::Ones(cfg_.num_levels, 1)));
    ad::Var variance = tape.matmul(out.d_p, tape.hadamard(centered, centered),
                                   true, false);
    out.sos_p = tape.sqrt_op(variance);
    return out;
  }

  // Contract-surface wrappers that run a throwaway tape.

  std::pair<ad::Mat, ad::Mat> short_term_memory(
      const Eigen::VectorXd& fused) const {
    ad::Tape tape;
    const ShortTermVars st = short_term_graph(tape, tape.constant(fused));
    return {tape.value(st.af), tape.value(st.s)};
  }

  ad::Mat long_term_memory(const ad::Mat& af, const ad::Mat& s) const {
    ad::Tape tape;
    return tape.value(
        long_term_graph(tape, tape.constant(af), tape.constant(s)));
  }

  QualityPrediction predict(const Eigen::VectorXd& fused,
                            const QualityScale& scale) const {
    ad::Tape tape;
    const PredictVars v = predict_graph(tape, tape.constant(fused), scale);
    return materialize(tape, v, scale);
  }

  QualityPrediction materialize(const ad::Tape& tape, const PredictVars& v,
                                const QualityScale& scale) const {
    auto to_dist = [&](ad::Var var) {
      const ad::Mat& m = tape.value(var);
      std::vector<double> probs(static_cast<std::size_t>(m.rows()));
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        probs[static_cast<std::size_t>(i)] = m(i, 0);
      }
      return OpinionDistribution::renormalized(std::move(probs), scale, 1e-6);
    };
    return QualityPrediction{to_dist(v.d_mem), to_dist(v.d_alg),
                             to_dist(v.d_p), tape.value(v.mos_p)(0, 0),
                             tape.value(v.sos_p)(0, 0)};
  }

  std::vector<ad::Parameter*> parameters() {
    return {&mask_w1_, &mask_b1_, &mask_w2_, &mask_b2_, &proj_w_, &proj_b_,
            &fuse_w_,  &fuse_b_,  &graph_label_w_, &graph_feat_w_,
            &gate_label_w_, &gate_feat_w_, &alg_w2_, &alg_b2_, &alg_w1_,
            &alg_b1_};
  }

 private:
  void check_fused(ad::Tape& tape, ad::Var fused) const {
    require(tape.rows(fused) == fused_dim_ && tape.cols(fused) == 1,
            ErrorKind::ShapeError,
            "fused vector must be " + std::to_string(fused_dim_) + " x 1");
    require(tape.value(fused).allFinite(), ErrorKind::NumericError,
            "non-finite fused features");
  }

  SlmConfig cfg_;
  int fused_dim_;
  mutable ad::Parameter mask_w1_, mask_b1_, mask_w2_, mask_b2_;
  mutable ad::Parameter proj_w_, proj_b_, fuse_w_, fuse_b_;
  mutable ad::Parameter graph_label_w_, graph_feat_w_;
  mutable ad::Parameter gate_label_w_, gate_feat_w_;
  mutable ad::Parameter alg_w2_, alg_b2_, alg_w1_, alg_b1_;
};

// Backbone + memory network + scale, with the per-stage fusion mask used by
// the stage ablation.
class Model {
 public:
  Model(std::unique_ptr<Backbone> backbone, SlmConfig config,
        QualityScale scale, std::uint64_t seed,
        std::array<bool, 3> stage_mask = {true, true, true})
      : backbone_(std::move(backbone)),
        slm_(config, backbone_->contract().fused_dim(), seed),
        scale_(std::move(scale)),
        stage_mask_(stage_mask) {
    require(scale_.num_levels() == config.num_levels, ErrorKind::ConfigError,
            "quality scale and network level counts differ");
  }

  const QualityScale& scale() const { return scale_; }
  const SlmConfig& config() const { return slm_.config(); }
  const BackboneContract& backbone_contract() const {
    return backbone_->contract();
  }
  Backbone& backbone() { return *backbone_; }
  SlmNetwork& slm() { return slm_; }
  const SlmNetwork& slm() const { return slm_; }
  const std::array<bool, 3>& stage_mask() const { return stage_mask_; }

  ad::Var fused_graph(ad::Tape& tape, const Image& input) {
    const FeatureBundleVars bundle = extract_features(tape, input, *backbone_);
    if (stage_mask_[0] && stage_mask_[1] && stage_mask_[2]) {
      return bundle.fused;
    }
    const auto& stages = backbone_->contract().stages;
    Eigen::VectorXd mask(backbone_->contract().fused_dim());
    Eigen::Index offset = 0;
    for (int i = 0; i < 3; ++i) {
      const double keep = stage_mask_[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
      mask.segment(offset, stages[static_cast<std::size_t>(i)].channels)
          .setConstant(keep);
      offset += stages[static_cast<std::size_t>(i)].channels;
    }
    return tape.hadamard(bundle.fused, tape.constant(mask));
  }

  SlmNetwork::PredictVars forward_graph(ad::Tape& tape, const Image& input) {
    return slm_.predict_graph(tape, fused_graph(tape, input), scale_);
  }

  QualityPrediction predict_image(const Image& input) {
    ad::Tape tape;
    const SlmNetwork::PredictVars v = forward_graph(tape, input);
    return slm_.materialize(tape, v, scale_);
  }

  std::vector<ad::Parameter*> parameters() {
    std::vector<ad::Parameter*> out = backbone_->parameters();
    const std::vector<ad::Parameter*> head = slm_.parameters();
    out.insert(out.end(), head.begin(), head.end());
    return out;
  }

 private:
  std::unique_ptr<Backbone> backbone_;
  SlmNetwork slm_;
  QualityScale scale_;
  std::array<bool, 3> stage_mask_;
};

}  // namespace opiq

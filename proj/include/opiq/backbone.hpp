// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// Feature-extraction backbones. A backbone exposes three stages of feature
// maps with declared shapes; the prediction network only depends on this
// contract, so pretrained externals can be plugged in behind it. The
// reference tiny backbone (strided patch embedding followed by one
// single-head self-attention block per stage) ships for desk-scale runs.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "opiq/autodiff.hpp"
#include "opiq/error.hpp"
#include "opiq/image.hpp"
#include "opiq/rng.hpp"

namespace opiq {

struct StageSpec {
  int channels = 0;
  int height = 0;
  int width = 0;
};

struct BackboneContract {
  std::string identity;
  int input_resolution = 0;  // square input, height == width
  std::array<StageSpec, 3> stages{};
  PreprocessSpec preprocess{};

  int fused_dim() const {
    return stages[0].channels + stages[1].channels + stages[2].channels;
  }

  void validate() const {
    require(input_resolution > 0, ErrorKind::ConfigError,
            "backbone input resolution must be positive");
    require(preprocess.crop_to == input_resolution, ErrorKind::ConfigError,
            "preprocess crop must match the backbone input resolution");
    for (int i = 0; i < 3; ++i) {
      require(stages[i].channels > 0 && stages[i].height > 0 &&
                  stages[i].width > 0,
              ErrorKind::ConfigError, "backbone stage shape must be positive");
    }
    for (int i = 1; i < 3; ++i) {
      require(stages[i].channels > stages[i - 1].channels,
              ErrorKind::ConfigError,
              "backbone stages must be channel-increasing");
      require(stages[i].height < stages[i - 1].height &&
                  stages[i].width < stages[i - 1].width,
              ErrorKind::ConfigError,
              "backbone stages must be spatially decreasing");
    }
  }

  // Declared shapes of the full-scale hybrid transformer this framework is
  // normally trained with: stages of 64/192/384 channels at 96/48/24 spatial
  // for a 384x384 input, preprocessed by a 512 resize and 384 crop.
  static BackboneContract full_scale() {
    BackboneContract c;
    c.identity = "external";
    c.input_resolution = 384;
    c.stages = {StageSpec{64, 96, 96}, StageSpec{192, 48, 48},
                StageSpec{384, 24, 24}};
    c.preprocess = PreprocessSpec{512, 384};
    c.validate();
    return c;
  }

  static BackboneContract reference_tiny() {
    BackboneContract c;
    c.identity = "reference_tiny";
    c.input_resolution = 64;
    c.stages = {StageSpec{16, 16, 16}, StageSpec{32, 8, 8}, StageSpec{64, 4, 4}};
    // 86:64 keeps the full-scale 512:384 resize-to-crop ratio.
    c.preprocess = PreprocessSpec{86, 64};
    c.validate();
    return c;
  }
};

class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual const BackboneContract& contract() const = 0;
  virtual std::array<ad::Var, 3> forward(ad::Tape& tape, const Image& input) = 0;
  virtual std::vector<ad::Parameter*> parameters() = 0;
};

namespace detail {

inline ad::Mat image_to_mat(const Image& img) {
  ad::Mat m(3, static_cast<Eigen::Index>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        m(ch, static_cast<Eigen::Index>(y) * img.width + x) = img.at(x, y, ch);
      }
    }
  }
  return m;
}

inline ad::Mat fan_in_init(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
  ad::Mat m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      m(r, c) = rng.uniform(-bound, bound);
    }
  }
  return m;
}

}  // namespace detail

// Three stages of (strided patch embedding -> single-head self-attention
// with a residual projection -> ReLU). Strides 4/2/2 halve the token grid
// the same way the full-scale contract does.
class ReferenceTinyBackbone : public Backbone {
 public:
  explicit ReferenceTinyBackbone(std::uint64_t seed = 0)
      : contract_(BackboneContract::reference_tiny()) {
    Rng rng = Rng::substream(seed, 0x42ac);
    const int in_channels[3] = {3, contract_.stages[0].channels,
                                contract_.stages[1].channels};
    const int kernels[3] = {4, 2, 2};
    for (int i = 0; i < 3; ++i) {
      Stage& st = stages_[i];
      const int c = contract_.stages[i].channels;
      const int fan_in = in_channels[i] * kernels[i] * kernels[i];
      const std::string prefix = "backbone.stage" + std::to_string(i + 1) + ".";
      st.kernel = kernels[i];
      st.embed_w = ad::Parameter(prefix + "embed.w",
                                 detail::fan_in_init(c, fan_in, rng));
      st.embed_b = ad::Parameter(prefix + "embed.b", ad::Mat::Zero(c, 1));
      st.wq = ad::Parameter(prefix + "attn.wq", detail::fan_in_init(c, c, rng));
      st.wk = ad::Parameter(prefix + "attn.wk", detail::fan_in_init(c, c, rng));
      st.wv = ad::Parameter(prefix + "attn.wv", detail::fan_in_init(c, c, rng));
      st.wo = ad::Parameter(prefix + "attn.wo", detail::fan_in_init(c, c, rng));
      st.bo = ad::Parameter(prefix + "attn.bo", ad::Mat::Zero(c, 1));
    }
  }

  const BackboneContract& contract() const override { return contract_; }

  std::array<ad::Var, 3> forward(ad::Tape& tape, const Image& input) override {
    require(input.width == contract_.input_resolution &&
                input.height == contract_.input_resolution,
            ErrorKind::ShapeError,
            "backbone expects " + std::to_string(contract_.input_resolution) +
                "x" + std::to_string(contract_.input_resolution) +
                " input, got " + std::to_string(input.width) + "x" +
                std::to_string(input.height));
    std::array<ad::Var, 3> features{};
    ad::Var x = tape.constant(detail::image_to_mat(input));
    int h = input.height;
    int w = input.width;
    int ch = 3;
    for (int i = 0; i < 3; ++i) {
      Stage& st = stages_[i];
      const int c_out = contract_.stages[i].channels;
      ad::Var cols = tape.im2col(x, ch, h, w, st.kernel, st.kernel);
      ad::Var z = tape.add_colvec(tape.matmul(tape.leaf(st.embed_w), cols),
                                  tape.leaf(st.embed_b));
      ad::Var q = tape.matmul(tape.leaf(st.wq), z);
      ad::Var k = tape.matmul(tape.leaf(st.wk), z);
      ad::Var v = tape.matmul(tape.leaf(st.wv), z);
      ad::Var attn = tape.softmax_rows(
          tape.scale(tape.matmul(q, k, true, false),
                     1.0 / std::sqrt(static_cast<double>(c_out))));
      ad::Var mixed = tape.matmul(v, attn, false, true);
      ad::Var proj = tape.add_colvec(tape.matmul(tape.leaf(st.wo), mixed),
                                     tape.leaf(st.bo));
      x = tape.relu(tape.add(z, proj));
      h /= st.kernel;
      w /= st.kernel;
      ch = c_out;
      features[static_cast<std::size_t>(i)] = x;
    }
    return features;
  }

  std::vector<ad::Parameter*> parameters() override {
    std::vector<ad::Parameter*> out;
    for (Stage& st : stages_) {
      out.push_back(&st.embed_w);
      out.push_back(&st.embed_b);
      out.push_back(&st.wq);
      out.push_back(&st.wk);
      out.push_back(&st.wv);
      out.push_back(&st.wo);
      out.push_back(&st.bo);
    }
    return out;
  }

 private:
  struct Stage {
    int kernel = 0;
    ad::Parameter embed_w, embed_b, wq, wk, wv, wo, bo;
  };
  BackboneContract contract_;
  std::array<Stage, 3> stages_;
};

inline std::unique_ptr<Backbone> make_backbone(const std::string& name,
                                               std::uint64_t seed) {
  if (name == "reference_tiny") {
    return std::make_unique<ReferenceTinyBackbone>(seed);
  }
  if (name == "external") {
    raise(ErrorKind::ConfigError,
          "the external backbone is a plug-in interface; this build ships "
          "only 'reference_tiny'");
  }
  raise(ErrorKind::ConfigError, "unknown backbone '" + name + "'");
}

// Per-stage feature maps plus their pooled concatenation.
struct FeatureBundleVars {
  std::array<ad::Var, 3> stages{};
  ad::Var fused;
};

inline FeatureBundleVars extract_features(ad::Tape& tape, const Image& input,
                                          Backbone& backbone) {
  const BackboneContract& c = backbone.contract();
  require(input.width == c.input_resolution &&
              input.height == c.input_resolution,
          ErrorKind::ShapeError,
          "input resolution " + std::to_string(input.width) + "x" +
              std::to_string(input.height) + " does not match the declared " +
              std::to_string(c.input_resolution));
  FeatureBundleVars bundle;
  bundle.stages = backbone.forward(tape, input);
  for (int i = 0; i < 3; ++i) {
    const StageSpec& spec = c.stages[static_cast<std::size_t>(i)];
    require(tape.rows(bundle.stages[static_cast<std::size_t>(i)]) == spec.channels &&
                tape.cols(bundle.stages[static_cast<std::size_t>(i)]) ==
                    static_cast<Eigen::Index>(spec.height) * spec.width,
            ErrorKind::ShapeError,
            "stage " + std::to_string(i + 1) +
                " produced a shape that violates the declared contract");
  }
  ad::Var g1 = tape.rowwise_mean(bundle.stages[0]);
  ad::Var g2 = tape.rowwise_mean(bundle.stages[1]);
  ad::Var g3 = tape.rowwise_mean(bundle.stages[2]);
  bundle.fused = tape.vconcat(tape.vconcat(g1, g2), g3);
  return bundle;
}

}  // namespace opiq

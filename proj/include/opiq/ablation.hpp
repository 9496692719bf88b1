// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// Ablation axes: fused-stage subsets, memory pathways, loss subsets, and
// balance-factor doubling/halving. Every variant shares the base config's
// seed and split plan so comparisons are paired.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "opiq/config.hpp"
#include "opiq/error.hpp"

namespace opiq {

enum class AblationAxis { Stages, Pathways, Losses, Balance };

inline AblationAxis ablation_axis_from_name(const std::string& name) {
  if (name == "stages") return AblationAxis::Stages;
  if (name == "pathways") return AblationAxis::Pathways;
  if (name == "losses") return AblationAxis::Losses;
  if (name == "balance") return AblationAxis::Balance;
  raise(ErrorKind::ConfigError, "unknown ablation axis '" + name + "'");
}

struct AblationVariant {
  std::string name;
  RunConfig config;
};

inline std::vector<AblationVariant> make_ablation_variants(
    const RunConfig& base, AblationAxis axis) {
  std::vector<AblationVariant> variants;
  switch (axis) {
    case AblationAxis::Stages: {
      for (int bits = 1; bits < 8; ++bits) {
        RunConfig c = base;
        std::string name = "stages_";
        for (int i = 0; i < 3; ++i) {
          c.stage_mask[static_cast<std::size_t>(i)] = (bits >> i) & 1;
          name += ((bits >> i) & 1) ? std::to_string(i + 1) : std::string();
        }
        variants.push_back({name, c});
      }
      break;
    }
    case AblationAxis::Pathways: {
      const std::pair<bool, bool> combos[4] = {
          {true, true}, {false, true}, {true, false}, {false, false}};
      const char* names[4] = {"both_pathways", "indirect_only", "direct_only",
                              "no_memory"};
      for (int i = 0; i < 4; ++i) {
        RunConfig c = base;
        c.slm.enable_direct_pathway = combos[i].first;
        c.slm.enable_indirect_pathway = combos[i].second;
        variants.push_back({names[i], c});
      }
      break;
    }
    case AblationAxis::Losses: {
      for (int bits = 1; bits < 8; ++bits) {
        RunConfig c = base;
        c.weights.emd_enabled = bits & 1;
        c.weights.l1_enabled = bits & 2;
        c.weights.esd_enabled = bits & 4;
        std::string name = "loss";
        if (c.weights.emd_enabled) name += "_emd";
        if (c.weights.l1_enabled) name += "_l1";
        if (c.weights.esd_enabled) name += "_esd";
        variants.push_back({name, c});
      }
      break;
    }
    case AblationAxis::Balance: {
      variants.push_back({"balance_base", base});
      auto scaled = [&](const char* name, double fa, double fb, double fg) {
        RunConfig c = base;
        c.weights.alpha *= fa;
        c.weights.beta *= fb;
        c.weights.gamma *= fg;
        variants.push_back({name, c});
      };
      scaled("balance_2alpha", 2.0, 1.0, 1.0);
      scaled("balance_half_alpha", 0.5, 1.0, 1.0);
      scaled("balance_2beta", 1.0, 2.0, 1.0);
      scaled("balance_half_beta", 1.0, 0.5, 1.0);
      scaled("balance_2gamma", 1.0, 1.0, 2.0);
      scaled("balance_half_gamma", 1.0, 1.0, 0.5);
      break;
    }
  }
  return variants;
}

}  // namespace opiq

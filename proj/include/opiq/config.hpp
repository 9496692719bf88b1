// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: one JSON-serializable struct that fully determines a
// training or evaluation run together with the code version.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "opiq/error.hpp"
#include "opiq/losses.hpp"
#include "opiq/manifest.hpp"
#include "opiq/network.hpp"

namespace opiq {

struct OptimizerConfig {
  std::string kind = "adam";
  double lr = 1e-5;
};

struct SplitConfig {
  std::uint64_t seed = 1;
  int num_repeats = 10;
  double train_fraction = 0.8;
};

struct RunConfig {
  std::string manifest_path;
  std::string backbone = "reference_tiny";
  SlmConfig slm;
  LossWeights weights;
  OptimizerConfig optimizer;
  int batch_size = 8;
  int epochs = 0;
  SplitConfig split;
  double a = 0.1477;
  std::uint64_t seed = 0;
  std::array<bool, 3> stage_mask = {true, true, true};

  void validate() const {
    slm.validate();
    weights.validate();
    require(optimizer.kind == "adam", ErrorKind::ConfigError,
            "unknown optimizer '" + optimizer.kind + "'");
    require(optimizer.lr > 0.0, ErrorKind::ConfigError,
            "learning rate must be positive");
    require(batch_size >= 1, ErrorKind::ConfigError,
            "batch size must be positive");
    require(epochs >= 0, ErrorKind::ConfigError, "epochs must be >= 0");
    require(a > 0.0, ErrorKind::ConfigError,
            "dispersion coefficient a must be positive");
    require(split.num_repeats >= 1, ErrorKind::ConfigError,
            "need at least one split repeat");
    require(split.train_fraction > 0.0 && split.train_fraction < 1.0,
            ErrorKind::ConfigError, "train fraction must be in (0, 1)");
    require(stage_mask[0] || stage_mask[1] || stage_mask[2],
            ErrorKind::ConfigError, "at least one stage must stay enabled");
  }
};

inline json run_config_to_json(const RunConfig& c) {
  return json{
      {"manifest_path", c.manifest_path},
      {"backbone", c.backbone},
      {"slm",
       {{"num_levels", c.slm.num_levels},
        {"hidden_channels", c.slm.hidden_channels},
        {"lambda_mix", c.slm.lambda_mix},
        {"enable_direct_pathway", c.slm.enable_direct_pathway},
        {"enable_indirect_pathway", c.slm.enable_indirect_pathway}}},
      {"weights",
       {{"alpha", c.weights.alpha},
        {"beta", c.weights.beta},
        {"gamma", c.weights.gamma},
        {"emd_enabled", c.weights.emd_enabled},
        {"l1_enabled", c.weights.l1_enabled},
        {"esd_enabled", c.weights.esd_enabled}}},
      {"optimizer", {{"kind", c.optimizer.kind}, {"lr", c.optimizer.lr}}},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"split",
       {{"seed", c.split.seed},
        {"num_repeats", c.split.num_repeats},
        {"train_fraction", c.split.train_fraction}}},
      {"a", c.a},
      {"seed", c.seed},
      {"stage_mask", c.stage_mask}};
}

inline RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    if (j.contains("manifest_path")) {
      c.manifest_path = j.at("manifest_path").get<std::string>();
    }
    if (j.contains("backbone")) c.backbone = j.at("backbone").get<std::string>();
    if (j.contains("slm")) {
      const json& s = j.at("slm");
      if (s.contains("num_levels")) c.slm.num_levels = s.at("num_levels").get<int>();
      if (s.contains("hidden_channels")) {
        c.slm.hidden_channels = s.at("hidden_channels").get<int>();
      }
      if (s.contains("lambda_mix")) c.slm.lambda_mix = s.at("lambda_mix").get<double>();
      if (s.contains("enable_direct_pathway")) {
        c.slm.enable_direct_pathway = s.at("enable_direct_pathway").get<bool>();
      }
      if (s.contains("enable_indirect_pathway")) {
        c.slm.enable_indirect_pathway = s.at("enable_indirect_pathway").get<bool>();
      }
    }
    if (j.contains("weights")) {
      const json& w = j.at("weights");
      if (w.contains("alpha")) c.weights.alpha = w.at("alpha").get<double>();
      if (w.contains("beta")) c.weights.beta = w.at("beta").get<double>();
      if (w.contains("gamma")) c.weights.gamma = w.at("gamma").get<double>();
      if (w.contains("emd_enabled")) c.weights.emd_enabled = w.at("emd_enabled").get<bool>();
      if (w.contains("l1_enabled")) c.weights.l1_enabled = w.at("l1_enabled").get<bool>();
      if (w.contains("esd_enabled")) c.weights.esd_enabled = w.at("esd_enabled").get<bool>();
    }
    if (j.contains("optimizer")) {
      const json& o = j.at("optimizer");
      if (o.contains("kind")) c.optimizer.kind = o.at("kind").get<std::string>();
      if (o.contains("lr")) c.optimizer.lr = o.at("lr").get<double>();
    }
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
    if (j.contains("split")) {
      const json& s = j.at("split");
      if (s.contains("seed")) c.split.seed = s.at("seed").get<std::uint64_t>();
      if (s.contains("num_repeats")) c.split.num_repeats = s.at("num_repeats").get<int>();
      if (s.contains("train_fraction")) {
        c.split.train_fraction = s.at("train_fraction").get<double>();
      }
    }
    if (j.contains("a")) c.a = j.at("a").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("stage_mask")) {
      const auto mask = j.at("stage_mask").get<std::vector<bool>>();
      require(mask.size() == 3, ErrorKind::ConfigError,
              "stage_mask must have 3 entries");
      for (int i = 0; i < 3; ++i) c.stage_mask[static_cast<std::size_t>(i)] = mask[static_cast<std::size_t>(i)];
    }
  } catch (const json::exception& e) {
    raise(ErrorKind::ParseError, std::string("bad run config: ") + e.what());
  }
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::IoError, "cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    raise(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

inline void save_run_config(const RunConfig& c,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::IoError,
          "cannot write config " + path.string());
  out << run_config_to_json(c).dump(2) << "\n";
}

}  // namespace opiq

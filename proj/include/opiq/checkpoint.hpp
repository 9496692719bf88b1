// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoints: a binary archive of parameter tensors keyed by dotted names,
// with a JSON sidecar (<path>.json) recording the network configuration,
// quality scale, backbone identity and format version. Loading demands an
// exact match of tensor names and shapes; nothing is ever reshaped.

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "opiq/error.hpp"
#include "opiq/manifest.hpp"
#include "opiq/network.hpp"

namespace opiq {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'O', 'P', 'I', 'Q',
                                             'C', 'K', 'P', 'T'};

inline json slm_config_to_json(const SlmConfig& c) {
  return json{{"num_levels", c.num_levels},
              {"hidden_channels", c.hidden_channels},
              {"lambda_mix", c.lambda_mix},
              {"enable_direct_pathway", c.enable_direct_pathway},
              {"enable_indirect_pathway", c.enable_indirect_pathway}};
}

inline SlmConfig slm_config_from_json(const json& j) {
  SlmConfig c;
  c.num_levels = j.at("num_levels").get<int>();
  c.hidden_channels = j.at("hidden_channels").get<int>();
  c.lambda_mix = j.at("lambda_mix").get<double>();
  c.enable_direct_pathway = j.at("enable_direct_pathway").get<bool>();
  c.enable_indirect_pathway = j.at("enable_indirect_pathway").get<bool>();
  c.validate();
  return c;
}

inline void save_checkpoint(Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::IoError,
          "cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::vector<ad::Parameter*> params = model.parameters();
  const std::uint64_t count = params.size();
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const ad::Parameter* p : params) {
    const std::uint32_t name_len = static_cast<std::uint32_t>(p->name.size());
    out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
    out.write(p->name.data(), name_len);
    const std::uint64_t rows = static_cast<std::uint64_t>(p->value.rows());
    const std::uint64_t cols = static_cast<std::uint64_t>(p->value.cols());
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(sizeof(double) * p->value.size()));
  }
  require(out.good(), ErrorKind::IoError,
          "failed writing checkpoint " + path.string());

  json sidecar{{"format_version", kCheckpointVersion},
               {"backbone", model.backbone_contract().identity},
               {"slm", slm_config_to_json(model.config())},
               {"scale", scale_to_json(model.scale())},
               {"stage_mask", model.stage_mask()}};
  std::ofstream side(path.string() + ".json");
  require(side.good(), ErrorKind::IoError,
          "cannot write checkpoint sidecar " + path.string() + ".json");
  side << sidecar.dump(2) << "\n";
}

inline Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream side_in(path.string() + ".json");
  require(side_in.good(), ErrorKind::IoError,
          "cannot open checkpoint sidecar " + path.string() + ".json");
  json sidecar;
  try {
    side_in >> sidecar;
  } catch (const json::exception& e) {
    raise(ErrorKind::ParseError,
          "bad checkpoint sidecar " + path.string() + ".json: " + e.what());
  }
  require(sidecar.at("format_version").get<std::uint32_t>() ==
              kCheckpointVersion,
          ErrorKind::ConfigError, "unsupported checkpoint format version");
  const std::string backbone_name = sidecar.at("backbone").get<std::string>();
  const SlmConfig slm_config = slm_config_from_json(sidecar.at("slm"));
  const QualityScale scale = scale_from_json(sidecar.at("scale"));
  std::array<bool, 3> stage_mask = {true, true, true};
  if (sidecar.contains("stage_mask")) {
    const auto mask = sidecar.at("stage_mask").get<std::vector<bool>>();
    require(mask.size() == 3, ErrorKind::ConfigError, "bad stage mask");
    for (int i = 0; i < 3; ++i) stage_mask[static_cast<std::size_t>(i)] = mask[static_cast<std::size_t>(i)];
  }

  Model model(make_backbone(backbone_name, 0), slm_config, scale, 0,
              stage_mask);

  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::IoError,
          "cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  require(in.good() && std::memcmp(magic, kCheckpointMagic, 8) == 0,
          ErrorKind::ParseError, path.string() + " is not a checkpoint");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  require(version == kCheckpointVersion, ErrorKind::ConfigError,
          "unsupported checkpoint tensor version");
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));

  std::map<std::string, ad::Parameter*> by_name;
  for (ad::Parameter* p : model.parameters()) by_name[p->name] = p;
  require(count == by_name.size(), ErrorKind::ConfigError,
          "checkpoint holds " + std::to_string(count) + " tensors, model has " +
              std::to_string(by_name.size()));

  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    require(in.good() && name_len < 4096, ErrorKind::ParseError,
            "corrupt checkpoint tensor name");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
    in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    const auto it = by_name.find(name);
    require(it != by_name.end(), ErrorKind::ConfigError,
            "checkpoint tensor '" + name + "' has no place in this model");
    ad::Parameter* p = it->second;
    require(static_cast<std::uint64_t>(p->value.rows()) == rows &&
                static_cast<std::uint64_t>(p->value.cols()) == cols,
            ErrorKind::ConfigError,
            "checkpoint tensor '" + name + "' shape mismatch");
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(sizeof(double) * p->value.size()));
    require(in.good(), ErrorKind::ParseError,
            "truncated checkpoint tensor '" + name + "'");
    by_name.erase(it);
  }
  require(by_name.empty(), ErrorKind::ConfigError,
          "checkpoint is missing tensors for this model");
  return model;
}

}  // namespace opiq

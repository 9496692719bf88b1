// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// Dataset manifests: one JSON header line describing the database, then one
// JSON object per image. Image paths are relative to the dataset root
// (OPIQ_DATA_ROOT if set, otherwise the manifest's own directory).

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "opiq/error.hpp"
#include "opiq/rating_stats.hpp"
#include "opiq/scale.hpp"

namespace opiq {

using json = nlohmann::json;

struct ManifestEntry {
  std::string image_path;
  double mos = 0.0;
  std::optional<double> sos;
  std::optional<std::vector<double>> dos;
  std::optional<std::vector<int>> raw_ratings;
};

struct DatasetManifest {
  std::string name;
  QualityScale scale = QualityScale::evenly_spaced(5, 1.0, 5.0);
  LabelCategory category = LabelCategory::MosOnly;
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;  // directory the manifest was loaded from

  SampleLabels labels_for(std::size_t index) const {
    const ManifestEntry& e = entries.at(index);
    switch (category) {
      case LabelCategory::DosAvailable:
        return SampleLabels::with_dos(
            e.mos, OpinionDistribution::renormalized(*e.dos, scale));
      case LabelCategory::MosSosAvailable:
        return SampleLabels::with_mos_sos(e.mos, *e.sos, scale);
      case LabelCategory::MosOnly:
        return SampleLabels::with_mos(e.mos, scale);
    }
    raise(ErrorKind::InvalidLabels, "unknown manifest category");
  }

  std::filesystem::path resolve_image_path(std::size_t index) const {
    const char* root = std::getenv("OPIQ_DATA_ROOT");
    const std::filesystem::path base = root ? std::filesystem::path(root)
                                            : base_dir;
    return base / entries.at(index).image_path;
  }
};

namespace detail {

inline void validate_entry(const ManifestEntry& e, const DatasetManifest& m,
                           std::size_t index) {
  auto fail = [&](const std::string& why) {
    raise(ErrorKind::ValidationError,
          "manifest '" + m.name + "' entry " + std::to_string(index) + " (" +
              e.image_path + "): " + why);
  };
  if (!(e.mos >= m.scale.range_start() && e.mos <= m.scale.range_end())) {
    fail("MOS outside the rating range");
  }
  switch (m.category) {
    case LabelCategory::DosAvailable: {
      if (!e.dos.has_value()) fail("category DOS_AVAILABLE requires a dos field");
      if (e.sos.has_value()) fail("category DOS_AVAILABLE must not carry sos");
      if (static_cast<int>(e.dos->size()) != m.scale.num_levels()) {
        fail("dos length does not match the scale");
      }
      double sum = 0.0;
      for (double p : *e.dos) {
        if (!(p >= 0.0)) fail("negative dos probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-6) fail("dos does not sum to 1 within 1e-6");
      const auto dist = OpinionDistribution::renormalized(*e.dos, m.scale);
      if (std::abs(e.mos - mos_of(dist)) > 1e-6) {
        fail("mos does not match the mean of dos");
      }
      break;
    }
    case LabelCategory::MosSosAvailable: {
      if (!e.sos.has_value()) fail("category MOS_SOS_AVAILABLE requires sos");
      if (e.dos.has_value()) fail("category MOS_SOS_AVAILABLE must not carry dos");
      if (!(*e.sos >= 0.0)) fail("negative sos");
      break;
    }
    case LabelCategory::MosOnly: {
      if (e.sos.has_value()) fail("category MOS_ONLY must not carry sos");
      if (e.dos.has_value()) fail("category MOS_ONLY must not carry dos");
      break;
    }
  }
}

}  // namespace detail

inline json scale_to_json(const QualityScale& scale) {
  return json{{"scores", scale.scores()},
              {"range", {scale.range_start(), scale.range_end()}}};
}

inline QualityScale scale_from_json(const json& j) {
  require(j.contains("scores") && j.contains("range"), ErrorKind::ParseError,
          "scale needs 'scores' and 'range'");
  const auto scores = j.at("scores").get<std::vector<double>>();
  const auto range = j.at("range").get<std::vector<double>>();
  require(range.size() == 2, ErrorKind::ParseError, "scale range must be [lo, hi]");
  return QualityScale(scores, range[0], range[1]);
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::IoError,
          "cannot open manifest " + path.string());
  DatasetManifest manifest;
  manifest.base_dir = path.has_parent_path() ? path.parent_path()
                                             : std::filesystem::path(".");
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      raise(ErrorKind::ParseError, path.string() + ":" +
                                        std::to_string(line_no) + ": " +
                                        e.what());
    }
    if (!have_header) {
      try {
        manifest.name = j.at("name").get<std::string>();
        manifest.scale = scale_from_json(j.at("scale"));
        manifest.category =
            label_category_from_name(j.at("category").get<std::string>());
      } catch (const json::exception& e) {
        raise(ErrorKind::ParseError, path.string() + ":" +
                                          std::to_string(line_no) +
                                          ": bad header: " + e.what());
      }
      have_header = true;
      continue;
    }
    ManifestEntry entry;
    try {
      entry.image_path = j.at("image_path").get<std::string>();
      entry.mos = j.at("mos").get<double>();
      if (j.contains("sos")) entry.sos = j.at("sos").get<double>();
      if (j.contains("dos")) entry.dos = j.at("dos").get<std::vector<double>>();
      if (j.contains("raw_ratings")) {
        entry.raw_ratings = j.at("raw_ratings").get<std::vector<int>>();
      }
    } catch (const json::exception& e) {
      raise(ErrorKind::ParseError, path.string() + ":" +
                                        std::to_string(line_no) + ": " +
                                        e.what());
    }
    detail::validate_entry(entry, manifest, manifest.entries.size());
    manifest.entries.push_back(std::move(entry));
  }
  require(have_header, ErrorKind::ParseError,
          "manifest " + path.string() + " has no header line");
  return manifest;
}

inline void save_manifest(const DatasetManifest& manifest,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::IoError,
          "cannot write manifest " + path.string());
  json header{{"name", manifest.name},
              {"scale", scale_to_json(manifest.scale)},
              {"category", label_category_name(manifest.category)}};
  out << header.dump() << "\n";
  for (const ManifestEntry& e : manifest.entries) {
    json j{{"image_path", e.image_path}, {"mos", e.mos}};
    if (e.sos) j["sos"] = *e.sos;
    if (e.dos) j["dos"] = *e.dos;
    if (e.raw_ratings) j["raw_ratings"] = *e.raw_ratings;
    out << j.dump() << "\n";
  }
  require(out.good(), ErrorKind::IoError,
          "failed writing manifest " + path.string());
}

}  // namespace opiq

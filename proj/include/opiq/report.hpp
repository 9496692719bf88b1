// Copyright (c) the opiq project authors.
// SPDX-License-Identifier: Apache-2.0
//
// Report rendering: collects result JSON files from a directory into one
// summary table (markdown) with a mean row, plus an SVG bar chart of SRCC
// per row. Deterministic given the same inputs.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "opiq/error.hpp"

namespace opiq {

struct ReportRow {
  std::string label;
  // metric name -> value; metric set may differ between rows
  std::map<std::string, double> values;
};

namespace detail {

inline std::optional<ReportRow> row_from_result(const json& j,
                                                const std::string& fallback) {
  if (!j.is_object() || !j.contains("mos")) return std::nullopt;
  ReportRow row;
  if (j.contains("variant")) {
    row.label = j.at("variant").get<std::string>();
  } else if (j.contains("split_id") && j.at("split_id").is_number_integer()) {
    row.label = "split_" + std::to_string(j.at("split_id").get<int>());
  } else {
    return std::nullopt;  // aggregate rows are recomputed, not copied
  }
  if (row.label.empty()) row.label = fallback;
  const json& mos = j.at("mos");
  for (const auto& [k, v] : mos.items()) {
    if (v.is_number()) row.values["mos." + k] = v.get<double>();
  }
  if (j.contains("dos")) {
    for (const auto& [k, v] : j.at("dos").items()) {
      if (v.is_number()) row.values["dos." + k] = v.get<double>();
    }
  }
  return row;
}

inline void collect_rows(const json& j, const std::string& fallback,
                         std::vector<ReportRow>& rows) {
  if (j.is_array()) {
    for (const json& item : j) collect_rows(item, fallback, rows);
    return;
  }
  if (j.is_object() && j.contains("rows")) {
    collect_rows(j.at("rows"), fallback, rows);
    return;
  }
  if (auto row = row_from_result(j, fallback)) rows.push_back(std::move(*row));
}

}  // namespace detail

inline std::vector<ReportRow> load_report_rows(
    const std::filesystem::path& results_dir) {
  require(std::filesystem::exists(results_dir), ErrorKind::NoResults,
          "results directory " + results_dir.string() + " does not exist");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(results_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<ReportRow> rows;
  for (const auto& file : files) {
    std::ifstream in(file);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      raise(ErrorKind::ParseError, file.string() + ": " + e.what());
    }
    detail::collect_rows(j, file.stem().string(), rows);
  }
  require(!rows.empty(), ErrorKind::NoResults,
          "no result rows found under " + results_dir.string());
  return rows;
}

// Columns shared by every row, in a fixed preferred order.
inline std::vector<std::string> shared_columns(
    const std::vector<ReportRow>& rows) {
  const std::vector<std::string> preferred = {
      "mos.srcc", "mos.plcc", "mos.rmse",       "dos.jsd",
      "dos.emd",  "dos.rmse", "dos.intersection", "dos.cosine"};
  std::vector<std::string> out;
  for (const std::string& col : preferred) {
    bool everywhere = true;
    for (const ReportRow& row : rows) {
      if (!row.values.count(col)) {
        everywhere = false;
        break;
      }
    }
    if (everywhere) out.push_back(col);
  }
  return out;
}

inline ReportRow mean_row(const std::vector<ReportRow>& rows,
                          const std::vector<std::string>& columns) {
  ReportRow mean;
  mean.label = "mean";
  for (const std::string& col : columns) {
    double sum = 0.0;
    for (const ReportRow& row : rows) sum += row.values.at(col);
    mean.values[col] = sum / static_cast<double>(rows.size());
  }
  return mean;
}

inline void write_summary_markdown(const std::vector<ReportRow>& rows,
                                   const std::vector<std::string>& columns,
                                   const ReportRow& mean,
                                   const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::IoError, "cannot write " + path.string());
  out << "| run |";
  for (const auto& col : columns) out << " " << col << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out << "---|";
  out << "\n";
  auto emit = [&](const ReportRow& row) {
    out << "| " << row.label << " |";
    char buf[32];
    for (const auto& col : columns) {
      std::snprintf(buf, sizeof(buf), "%.6f", row.values.at(col));
      out << " " << buf << " |";
    }
    out << "\n";
  };
  for (const ReportRow& row : rows) emit(row);
  emit(mean);
}

// Bar chart of one metric across rows, as a standalone SVG.
inline void write_bar_chart_svg(const std::vector<ReportRow>& rows,
                                const std::string& metric,
                                const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::IoError, "cannot write " + path.string());
  const int bar_w = 46;
  const int gap = 18;
  const int chart_h = 220;
  const int label_h = 90;
  const int left = 50;
  const int width =
      left + static_cast<int>(rows.size()) * (bar_w + gap) + gap;
  const int height = chart_h + label_h + 30;
  double max_v = 1e-12;
  for (const ReportRow& row : rows) {
    const auto it = row.values.find(metric);
    if (it != row.values.end()) max_v = std::max(max_v, std::abs(it->second));
  }
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<text x=\"10\" y=\"18\" font-size=\"13\" font-family=\"sans-serif\">"
      << metric << "</text>\n";
  out << "<line x1=\"" << left - 6 << "\" y1=\"" << 20 + chart_h << "\" x2=\""
      << width - 8 << "\" y2=\"" << 20 + chart_h
      << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
  int x = left;
  char buf[32];
  for (const ReportRow& row : rows) {
    const auto it = row.values.find(metric);
    const double v = it != row.values.end() ? it->second : 0.0;
    const int h =
        static_cast<int>(std::max(0.0, v) / max_v * (chart_h - 10));
    out << "<rect x=\"" << x << "\" y=\"" << 20 + chart_h - h << "\" width=\""
        << bar_w << "\" height=\"" << h << "\" fill=\"#4878a8\"/>\n";
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    out << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << 20 + chart_h - h - 4
        << "\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"middle\">"
        << buf << "</text>\n";
    out << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << 20 + chart_h + 12
        << "\" font-size=\"10\" font-family=\"sans-serif\" text-anchor=\"end\" "
        << "transform=\"rotate(-45 " << x + bar_w / 2 << " "
        << 20 + chart_h + 12 << ")\">" << row.label << "</text>\n";
    x += bar_w + gap;
  }
  out << "</svg>\n";
}

}  // namespace opiq

// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rank4class/error.hpp"

namespace rank4class {

/// One trained configuration. Metric values are already multiplied by 100.
struct ReportRow {
  std::string dataset;
  std::string loss;
  std::string interaction;
  double top1_error = 0.0;
  double top5_error = 0.0;
  double ndcg5 = 0.0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::string config;  // canonical key=value echo
  std::uint64_t seed = 0;
};

enum class ReportFormat { kCsv, kMarkdown };

inline ReportFormat parse_report_format(std::string_view name) {
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "md") return ReportFormat::kMarkdown;
  throw UsageError("unknown report format '" + std::string(name) + "' (valid: csv, md)");
}

/// Two decimals, as every report prints them.
inline std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

/// Which rows hold the best printed value of each metric. Lower is better for
/// the error columns, higher for ndcg5; ties are all marked.
struct BestMarks {
  std::vector<bool> top1_error;
  std::vector<bool> top5_error;
  std::vector<bool> ndcg5;
};

inline BestMarks best_marks(const std::vector<ReportRow>& rows) {
  BestMarks marks{std::vector<bool>(rows.size()), std::vector<bool>(rows.size()),
                  std::vector<bool>(rows.size())};
  if (rows.empty()) return marks;
  auto mark = [&rows](std::vector<bool>& out, double ReportRow::*field, bool lower_is_better) {
    auto printed = [](double v) { return std::stod(format_metric(v)); };
    double best = printed(rows.front().*field);
    for (const ReportRow& r : rows) {
      const double v = printed(r.*field);
      if (lower_is_better ? v < best : v > best) best = v;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = printed(rows[i].*field) == best;
  };
  mark(marks.top1_error, &ReportRow::top1_error, true);
  mark(marks.top5_error, &ReportRow::top5_error, true);
  mark(marks.ndcg5, &ReportRow::ndcg5, false);
  return marks;
}

inline constexpr std::string_view kReportCsvHeader =
    "dataset,loss,interaction,top1_error,top5_error,ndcg5,best";

/// CSV: fixed columns; `best` lists the metrics this row leads, joined by ';'.
inline void write_report_csv(const ExperimentReport& report, std::ostream& out) {
  out << kReportCsvHeader << '\n';
  const BestMarks marks = best_marks(report.rows);
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const ReportRow& r = report.rows[i];
    std::string best;
    auto append = [&best](bool on, std::string_view name) {
      if (!on) return;
      if (!best.empty()) best += ';';
      best += name;
    };
    append(marks.top1_error[i], "top1_error");
    append(marks.top5_error[i], "top5_error");
    append(marks.ndcg5[i], "ndcg5");
    out << r.dataset << ',' << r.loss << ',' << r.interaction << ',' << format_metric(r.top1_error)
        << ',' << format_metric(r.top5_error) << ',' << format_metric(r.ndcg5) << ',' << best
        << '\n';
  }
}

/// Markdown table; best cells bold and starred. The config echo and seed go
/// in an HTML comment above the table.
inline void write_report_md(const ExperimentReport& report, std::ostream& out) {
  if (!report.config.empty()) {
    out << "<!-- seed=" << report.seed << ' ' << report.config << " -->\n";
  }
  out << "| dataset | loss | interaction | Top-1 Error | Top-5 Error | NDCG@5 |\n";
  out << "|---|---|---|---:|---:|---:|\n";
  const BestMarks marks = best_marks(report.rows);
  auto cell = [](double v, bool best) {
    return best ? "**" + format_metric(v) + "**\\*" : format_metric(v);
  };
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const ReportRow& r = report.rows[i];
    out << "| " << r.dataset << " | " << r.loss << " | " << r.interaction << " | "
        << cell(r.top1_error, marks.top1_error[i]) << " | "
        << cell(r.top5_error, marks.top5_error[i]) << " | " << cell(r.ndcg5, marks.ndcg5[i])
        << " |\n";
  }
}

inline void write_report(const ExperimentReport& report, ReportFormat format, std::ostream& out) {
  if (format == ReportFormat::kCsv) {
    write_report_csv(report, out);
  } else {
    write_report_md(report, out);
  }
}

inline std::string render_report(const ExperimentReport& report, ReportFormat format) {
  std::ostringstream out;
  write_report(report, format, out);
  return out.str();
}

inline void emit_report(const ExperimentReport& report, const std::string& path,
                        ReportFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_report(report, format, out);
  out.flush();
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

/// Parses the CSV written by write_report_csv. The `best` column is ignored;
/// marks are recomputed from the values.
inline ExperimentReport read_report_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty report", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kReportCsvHeader) throw ParseError("unexpected report header", line_no);
  ExperimentReport report;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.emplace_back();
    if (fields.size() != 7) throw SchemaError("expected 7 columns", line_no);
    ReportRow row{fields[0], fields[1], fields[2], 0, 0, 0};
    std::array<double*, 3> targets{&row.top1_error, &row.top5_error, &row.ndcg5};
    for (std::size_t k = 0; k < 3; ++k) {
      try {
        std::size_t used = 0;
        *targets[k] = std::stod(fields[3 + k], &used);
        if (used != fields[3 + k].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError("bad metric value '" + fields[3 + k] + "'", line_no);
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

inline ExperimentReport load_report_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_report_csv(in);
}

}  // namespace rank4class

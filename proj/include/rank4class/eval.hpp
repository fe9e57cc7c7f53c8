// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "rank4class/data.hpp"
#include "rank4class/error.hpp"
#include "rank4class/experiment.hpp"
#include "rank4class/report.hpp"

// Score files: a header row (column names are not checked) and one row of n
// scores per instance. Label files: header `label` and one class index per
// row; extra columns are ignored, so a dataset CSV works as a label file.

namespace rank4class {

inline Tensor read_scores_csv(std::istream& in) {
  std::string text;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (detail::blank(text)) continue;
    width = detail::split_fields(detail::trim(text)).size();
    break;
  }
  if (width == 0) throw ParseError("missing header", line_no);
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (detail::blank(text)) continue;
    const auto fields = detail::split_fields(detail::trim(text));
    if (fields.size() != width) {
      throw SchemaError("expected " + std::to_string(width) + " scores, found " +
                            std::to_string(fields.size()),
                        line_no);
    }
    for (std::size_t c = 0; c < width; ++c) {
      values.push_back(detail::parse_field(fields[c], line_no, c));
    }
    ++rows;
  }
  if (rows == 0) throw ParseError("no score rows", line_no);
  return Tensor(Shape{rows, width}, std::move(values));
}

inline std::vector<std::size_t> read_labels_csv(std::istream& in) {
  std::string text;
  std::size_t line_no = 0;
  bool header = false;
  std::vector<std::size_t> labels;
  while (std::getline(in, text)) {
    ++line_no;
    if (detail::blank(text)) continue;
    const auto fields = detail::split_fields(detail::trim(text));
    if (!header) {
      if (detail::trim(fields.front()) != "label") {
        throw ParseError("label file header must start with 'label'", line_no);
      }
      header = true;
      continue;
    }
    labels.push_back(detail::parse_label(fields.front(), line_no));
  }
  if (!header) throw ParseError("missing header", line_no);
  if (labels.empty()) throw ParseError("no labels", line_no);
  return labels;
}

inline Tensor load_scores_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_scores_csv(in);
}

inline std::vector<std::size_t> load_labels_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_labels_csv(in);
}

struct ScoredFile {
  std::string name;
  EvalSummary summary;
};

struct EvalResult {
  std::vector<ScoredFile> files;
};

/// Mean metrics of each score matrix against shared labels.
inline EvalResult evaluate_files(const std::vector<std::pair<std::string, Tensor>>& scores,
                                 const std::vector<std::size_t>& labels,
                                 const std::vector<std::size_t>& ks) {
  if (ks.empty()) throw UsageError("eval needs at least one cutoff");
  EvalResult out;
  for (const auto& [name, matrix] : scores) {
    if (matrix.rows() != labels.size()) {
      throw UsageError(name + " has " + std::to_string(matrix.rows()) + " rows but there are " +
                       std::to_string(labels.size()) + " labels");
    }
    out.files.push_back({name, evaluate_scores(matrix, labels, ks)});
  }
  return out;
}

inline EvalResult cmd_eval(const std::vector<std::string>& score_paths,
                           const std::string& labels_path, const std::vector<std::size_t>& ks) {
  if (score_paths.empty()) throw UsageError("eval needs at least one score file");
  const auto labels = load_labels_csv(labels_path);
  std::vector<std::pair<std::string, Tensor>> scores;
  for (const auto& path : score_paths) scores.emplace_back(path, load_scores_csv(path));
  return evaluate_files(scores, labels, ks);
}

/// Metric table (x100, two decimals), then for each pair of files which
/// printed metrics tie and which differ.
inline void write_eval(const EvalResult& result, std::ostream& out) {
  out << "scores,k,top_k_accuracy,top_k_error,ndcg,mrr\n";
  for (const ScoredFile& f : result.files) {
    for (std::size_t i = 0; i < f.summary.ks.size(); ++i) {
      out << f.name << ',' << f.summary.ks[i] << ','
          << format_metric(100.0 * f.summary.top_k_accuracy[i]) << ','
          << format_metric(100.0 * (1.0 - f.summary.top_k_accuracy[i])) << ','
          << format_metric(100.0 * f.summary.ndcg[i]) << ','
          << format_metric(100.0 * f.summary.mrr) << '\n';
    }
  }
  for (std::size_t a = 0; a < result.files.size(); ++a) {
    for (std::size_t b = a + 1; b < result.files.size(); ++b) {
      const ScoredFile& x = result.files[a];
      const ScoredFile& y = result.files[b];
      out << "\ncompare " << x.name << " vs " << y.name << '\n';
      for (std::size_t i = 0; i < x.summary.ks.size(); ++i) {
        const std::size_t k = x.summary.ks[i];
        const std::string ex = format_metric(100.0 * (1.0 - x.summary.top_k_accuracy[i]));
        const std::string ey = format_metric(100.0 * (1.0 - y.summary.top_k_accuracy[i]));
        out << "  top" << k << "_error: "
            << (ex == ey ? "tie at " + ex : x.name + " " + ex + ", " + y.name + " " + ey) << '\n';
      }
      for (std::size_t i = 0; i < x.summary.ks.size(); ++i) {
        const std::size_t k = x.summary.ks[i];
        const double nx = 100.0 * x.summary.ndcg[i];
        const double ny = 100.0 * y.summary.ndcg[i];
        out << "  ndcg@" << k << ": ";
        if (format_metric(nx) == format_metric(ny)) {
          out << "tie at " << format_metric(nx) << '\n';
        } else {
          const bool x_first = nx > ny;
          out << (x_first ? x.name : y.name) << " > " << (x_first ? y.name : x.name) << " by "
              << format_metric(std::abs(nx - ny)) << '\n';
        }
      }
    }
  }
}

}  // namespace rank4class

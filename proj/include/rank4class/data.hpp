// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "rank4class/error.hpp"
#include "rank4class/random.hpp"
#include "rank4class/tensor.hpp"

namespace rank4class {

/// Feature vectors with one class label each.
struct Dataset {
  Tensor features;                  // [N x d0]
  std::vector<std::size_t> labels;  // N entries in [0, num_classes)
  std::size_t num_classes = 0;
  std::string name;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }

  void validate() const {
    if (labels.empty()) throw UsageError("dataset '" + name + "' is empty");
    if (features.rank() != 2 || features.rows() != labels.size()) {
      throw ShapeError("dataset features " + to_string(features.shape()) + " vs " +
                       std::to_string(labels.size()) + " labels");
    }
    if (!features.all_finite()) throw UsageError("dataset '" + name + "' has non-finite features");
    for (std::size_t y : labels) {
      if (y >= num_classes) {
        throw UsageError("label " + std::to_string(y) + " outside [0, " +
                         std::to_string(num_classes) + ")");
      }
    }
  }
};

/// Rows `indices` of `data`, in that order.
inline Dataset subset(const Dataset& data, std::span<const std::size_t> indices,
                      std::string name) {
  Dataset out;
  out.name = std::move(name);
  out.num_classes = data.num_classes;
  const std::size_t d = data.dim();
  out.features = Tensor(Shape{indices.size(), d});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = data.features.row(indices[r]);
    std::copy(src.begin(), src.end(), out.features.row(r).begin());
    out.labels.push_back(data.labels[indices[r]]);
  }
  return out;
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline double parse_field(std::string_view field, std::size_t line, std::size_t column) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto result = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || result.ec != std::errc() || result.ptr != field.data() + field.size() ||
      !std::isfinite(v)) {
    throw ParseError("column " + std::to_string(column + 1) + ": '" + std::string(field) +
                         "' is not a finite number",
                     line);
  }
  return v;
}

inline std::size_t parse_label(std::string_view field, std::size_t line) {
  field = trim(field);
  std::size_t v = 0;
  const auto result = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || result.ec != std::errc() || result.ptr != field.data() + field.size()) {
    throw ParseError("label '" + std::string(field) + "' is not a nonnegative integer", line);
  }
  return v;
}

inline bool blank(std::string_view line) { return trim(line).empty(); }

}  // namespace detail

/// Reads `label,f0,...,f{d0-1}`. num_classes is 1 + max label unless given.
inline Dataset read_csv(std::istream& in, std::string name,
                        std::optional<std::size_t> num_classes = std::nullopt) {
  std::string text;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (detail::blank(text)) continue;
    const auto header = detail::split_fields(detail::trim(text));
    if (detail::trim(header.front()) != "label" || header.size() < 2) {
      throw ParseError("header must start with 'label' and name at least one feature", line_no);
    }
    width = header.size();
    break;
  }
  if (width == 0) throw ParseError("missing header", line_no);

  std::vector<double> values;
  std::vector<std::size_t> labels;
  while (std::getline(in, text)) {
    ++line_no;
    if (detail::blank(text)) continue;
    const auto fields = detail::split_fields(detail::trim(text));
    if (fields.size() != width) {
      throw SchemaError("expected " + std::to_string(width) + " columns, found " +
                            std::to_string(fields.size()),
                        line_no);
    }
    labels.push_back(detail::parse_label(fields[0], line_no));
    for (std::size_t c = 1; c < width; ++c) {
      values.push_back(detail::parse_field(fields[c], line_no, c));
    }
  }
  if (labels.empty()) throw ParseError("no data rows", line_no);

  Dataset data;
  data.name = std::move(name);
  data.features = Tensor(Shape{labels.size(), width - 1}, std::move(values));
  data.labels = std::move(labels);
  const std::size_t inferred = *std::max_element(data.labels.begin(), data.labels.end()) + 1;
  data.num_classes = num_classes.value_or(inferred);
  data.validate();
  return data;
}

inline Dataset load_csv(const std::string& path,
                        std::optional<std::size_t> num_classes = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_csv(in, path, num_classes);
}

/// Normalized form: LF line endings, shortest round-trip numbers.
inline void write_csv(const Dataset& data, std::ostream& out) {
  out << "label";
  for (std::size_t j = 0; j < data.dim(); ++j) out << ",f" << j;
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < data.size(); ++r) {
    out << data.labels[r];
    for (double v : data.features.row(r)) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

inline void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_csv(data, out);
}

/// Gaussian blobs: per-class means 4 * N(0, I) drawn first, then per_class
/// points mean + std * N(0, I) for each class in turn.
inline Dataset synth_blobs(std::size_t num_classes, std::size_t dim, std::size_t per_class,
                           double std_dev, std::uint64_t seed) {
  if (num_classes < 2) throw UsageError("synth_blobs: need at least two classes");
  if (per_class < 1) throw UsageError("synth_blobs: need at least one point per class");
  if (dim < 1) throw UsageError("synth_blobs: need at least one feature");
  if (!(std_dev >= 0.0)) throw UsageError("synth_blobs: std must be nonnegative");
  Rng rng(seed);
  Tensor means(Shape{num_classes, dim});
  for (double& m : means.data()) m = 4.0 * rng.normal();
  Dataset data;
  data.name = "blobs";
  data.num_classes = num_classes;
  data.features = Tensor(Shape{num_classes * per_class, dim});
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t k = 0; k < per_class; ++k) {
      const std::size_t r = c * per_class + k;
      for (std::size_t j = 0; j < dim; ++j) {
        data.features.at(r, j) = means.at(c, j) + std_dev * rng.normal();
      }
      data.labels.push_back(c);
    }
  }
  return data;
}

struct SplitFractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct DatasetSplit {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Seeded shuffle, then consecutive train | val | test blocks. Validation and
/// test sizes are floor(fraction * N); the remainder goes to train.
inline DatasetSplit split(const Dataset& data, SplitFractions fractions, std::uint64_t seed) {
  if (!(fractions.train > 0.0 && fractions.val > 0.0 && fractions.test > 0.0)) {
    throw UsageError("split fractions must be positive");
  }
  if (std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9) {
    throw UsageError("split fractions must sum to 1");
  }
  const std::size_t n = data.size();
  // 1e-9 absorbs products like 0.29 * 100 = 28.999999999999996.
  const auto block = [n](double f) {
    return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_val = block(fractions.val);
  const std::size_t n_test = block(fractions.test);
  const std::size_t n_train = n - n_val - n_test;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const std::span<const std::size_t> all(order);
  return DatasetSplit{subset(data, all.subspan(0, n_train), data.name + "/train"),
                      subset(data, all.subspan(n_train, n_val), data.name + "/val"),
                      subset(data, all.subspan(n_train + n_val, n_test), data.name + "/test")};
}

/// Row indices of each minibatch for one epoch: a permutation seeded by
/// (seed, epoch) cut into consecutive slices; the last may be short.
inline std::vector<std::vector<std::size_t>> batches(std::size_t count, std::size_t batch_size,
                                                     std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size < 1) throw UsageError("batch size must be at least 1");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, epoch));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

inline std::vector<std::vector<std::size_t>> batches(const Dataset& data, std::size_t batch_size,
                                                     std::uint64_t seed, std::uint64_t epoch) {
  return batches(data.size(), batch_size, seed, epoch);
}

}  // namespace rank4class

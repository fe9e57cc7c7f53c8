// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "rank4class/error.hpp"
#include "rank4class/model.hpp"

// Text checkpoint for a RankingModel. Layout, one record per line:
//
//   rank4class-checkpoint 1
//   encoder <activation> <count> <size_0> ... <size_L>
//   head <dot|lc_mlp|concat_mlp> <width>
//   tensor <name> <rank> <dim_0> ... <dim_{rank-1}>
//   <value> <value> ...            (all entries, row-major, one line)
//   ...                            (tensors in parameters() order)
//   end
//
// Values are written with std::to_chars shortest round-trip form, so reading
// a checkpoint back reproduces every double bit for bit.

namespace rank4class {

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline std::string format_double(double v) {
  char buf[32];
  const auto result = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, result.ptr);
}

inline double parse_double(const std::string& token, std::size_t line) {
  double v = 0.0;
  const char* end = token.data() + token.size();
  const auto result = std::from_chars(token.data(), end, v);
  if (result.ec != std::errc() || result.ptr != end) {
    throw ParseError("not a number: '" + token + "'", line);
  }
  return v;
}

inline std::vector<std::string> parameter_names(const RankingModel& model) {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < model.encoder().layers().size(); ++l) {
    names.push_back("encoder." + std::to_string(l) + ".weight");
    names.push_back("encoder." + std::to_string(l) + ".bias");
  }
  names.emplace_back("classes");
  for (std::size_t l = 0; l < model.head().mlp().size(); ++l) {
    names.push_back("head." + std::to_string(l) + ".weight");
    names.push_back("head." + std::to_string(l) + ".bias");
  }
  return names;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::istringstream next(const char* what) {
    std::string text;
    if (!std::getline(in_, text)) throw ParseError(std::string("missing ") + what, line_ + 1);
    ++line_;
    return std::istringstream(text);
  }

  std::size_t line() const { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

inline void expect_word(std::istringstream& in, const std::string& word, std::size_t line) {
  std::string got;
  if (!(in >> got) || got != word) {
    throw ParseError("expected '" + word + "', got '" + got + "'", line);
  }
}

inline std::size_t read_count(std::istringstream& in, std::size_t line) {
  std::string token;
  if (!(in >> token)) throw ParseError("missing integer", line);
  std::size_t v = 0;
  const auto result = std::from_chars(token.data(), token.data() + token.size(), v);
  if (result.ec != std::errc() || result.ptr != token.data() + token.size()) {
    throw ParseError("not an integer: '" + token + "'", line);
  }
  return v;
}

}  // namespace detail

inline void save_checkpoint(const RankingModel& model, std::ostream& out) {
  out << "rank4class-checkpoint " << kCheckpointVersion << '\n';
  const auto& sizes = model.encoder().sizes();
  out << "encoder " << activation_name(model.encoder().activation()) << ' ' << sizes.size();
  for (std::size_t s : sizes) out << ' ' << s;
  out << '\n';
  out << "head " << interaction_name(model.head().kind()) << ' ' << model.head().width()
      << '\n';
  const auto names = detail::parameter_names(model);
  const auto params = model.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Tensor& t = *params[p];
    out << "tensor " << names[p] << ' ' << t.rank();
    for (std::size_t d : t.shape()) out << ' ' << d;
    out << '\n';
    for (std::size_t i = 0; i < t.size(); ++i) {
      out << (i ? " " : "") << detail::format_double(t[i]);
    }
    out << '\n';
  }
  out << "end\n";
}

inline RankingModel load_checkpoint(std::istream& in) {
  detail::LineReader reader(in);

  auto header = reader.next("header");
  detail::expect_word(header, "rank4class-checkpoint", reader.line());
  const std::size_t version = detail::read_count(header, reader.line());
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version),
                     reader.line());
  }

  auto enc = reader.next("encoder record");
  detail::expect_word(enc, "encoder", reader.line());
  std::string activation;
  enc >> activation;
  const Activation act = parse_activation(activation);
  const std::size_t count = detail::read_count(enc, reader.line());
  std::vector<std::size_t> sizes;
  for (std::size_t i = 0; i < count; ++i) sizes.push_back(detail::read_count(enc, reader.line()));

  auto head_line = reader.next("head record");
  detail::expect_word(head_line, "head", reader.line());
  std::string kind_name;
  head_line >> kind_name;
  const InteractionKind kind = parse_interaction(kind_name);
  const std::size_t width = detail::read_count(head_line, reader.line());

  auto read_tensor = [&](const std::string& expected_name) {
    auto meta = reader.next("tensor record");
    detail::expect_word(meta, "tensor", reader.line());
    detail::expect_word(meta, expected_name, reader.line());
    const std::size_t rank = detail::read_count(meta, reader.line());
    Shape shape;
    for (std::size_t i = 0; i < rank; ++i) shape.push_back(detail::read_count(meta, reader.line()));
    auto values_line = reader.next("tensor values");
    std::vector<double> values;
    std::string token;
    while (values_line >> token) values.push_back(detail::parse_double(token, reader.line()));
    if (values.size() != element_count(shape)) {
      throw ParseError("tensor " + expected_name + " has " + std::to_string(values.size()) +
                           " values, shape needs " + std::to_string(element_count(shape)),
                       reader.line());
    }
    return Tensor(std::move(shape), std::move(values));
  };

  std::vector<DenseLayer> encoder_layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Tensor w = read_tensor("encoder." + std::to_string(l) + ".weight");
    Tensor b = read_tensor("encoder." + std::to_string(l) + ".bias");
    encoder_layers.push_back(DenseLayer{std::move(w), std::move(b)});
  }
  Tensor table = read_tensor("classes");
  std::vector<DenseLayer> mlp;
  if (kind != InteractionKind::kDot) {
    for (std::size_t l = 0; l < 3; ++l) {
      Tensor w = read_tensor("head." + std::to_string(l) + ".weight");
      Tensor b = read_tensor("head." + std::to_string(l) + ".bias");
      mlp.push_back(DenseLayer{std::move(w), std::move(b)});
    }
  }
  auto tail = reader.next("end marker");
  detail::expect_word(tail, "end", reader.line());

  return RankingModel(InstanceEncoder(std::move(sizes), act, std::move(encoder_layers)),
                      ClassEmbeddingTable(std::move(table)),
                      InteractionHead(kind, width, std::move(mlp)));
}

inline void save_checkpoint(const RankingModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save_checkpoint(model, out);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline RankingModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace rank4class

// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rank4class/error.hpp"
#include "rank4class/ops.hpp"
#include "rank4class/random.hpp"
#include "rank4class/tape.hpp"
#include "rank4class/tensor.hpp"

namespace rank4class {

enum class Activation { kRelu, kTanh, kIdentity };

inline std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

inline Activation parse_activation(std::string_view name) {
  for (Activation a : {Activation::kRelu, Activation::kTanh, Activation::kIdentity}) {
    if (activation_name(a) == name) return a;
  }
  throw UsageError("unknown activation '" + std::string(name) +
                   "' (valid: relu, tanh, identity)");
}

inline Var activate(Var x, Activation a) {
  switch (a) {
    case Activation::kRelu: return relu(x);
    case Activation::kTanh: return tanh(x);
    case Activation::kIdentity: return x;
  }
  return x;
}

enum class InteractionKind { kDot, kLcMlp, kConcatMlp };

inline constexpr std::array<InteractionKind, 3> kAllInteractions = {
    InteractionKind::kDot, InteractionKind::kLcMlp, InteractionKind::kConcatMlp};

inline std::string_view interaction_name(InteractionKind kind) {
  switch (kind) {
    case InteractionKind::kDot: return "dot";
    case InteractionKind::kLcMlp: return "lc_mlp";
    case InteractionKind::kConcatMlp: return "concat_mlp";
  }
  return "?";
}

inline InteractionKind parse_interaction(std::string_view name) {
  for (InteractionKind kind : kAllInteractions) {
    if (interaction_name(kind) == name) return kind;
  }
  throw UsageError("unknown interaction '" + std::string(name) +
                   "' (valid: dot, lc_mlp, concat_mlp)");
}

/// Maps model tensors to leaves of one tape. Trainable bindings create
/// parameter leaves so backward() reports their gradients; frozen ones create
/// constants and skip all gradient work.
class Binding {
 public:
  Binding(Tape& tape, bool trainable) : tape_(&tape), trainable_(trainable) {}

  Tape& tape() const { return *tape_; }

  Var operator()(const Tensor& t) {
    for (const auto& [ptr, var] : bound_) {
      if (ptr == &t) return var;
    }
    Var v = trainable_ ? tape_->parameter(t) : tape_->constant(t);
    bound_.emplace_back(&t, v);
    return v;
  }

  /// Gradient of the last backward() output w.r.t. a bound tensor.
  const Tensor& grad(const Tensor& t) const {
    for (const auto& [ptr, var] : bound_) {
      if (ptr == &t) return tape_->grad(var);
    }
    throw UsageError("grad() of a tensor that was never bound");
  }

 private:
  Tape* tape_;
  bool trainable_;
  std::vector<std::pair<const Tensor*, Var>> bound_;
};

/// weights [out x in], bias [out].
struct DenseLayer {
  Tensor weights;
  Tensor bias;

  std::size_t in() const { return weights.cols(); }
  std::size_t out() const { return weights.rows(); }

  /// Uniform in [-1/sqrt(in), 1/sqrt(in)], weights row-major then bias.
  static DenseLayer init(std::size_t in, std::size_t out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    DenseLayer layer{Tensor(Shape{out, in}), Tensor(Shape{out})};
    for (double& w : layer.weights.data()) w = rng.uniform(-bound, bound);
    for (double& b : layer.bias.data()) b = rng.uniform(-bound, bound);
    return layer;
  }

  Var apply(Binding& bind, Var x) const { return linear(x, bind(weights), bind(bias)); }
};

/// Feed-forward encoder x -> h. The activation follows every layer but the
/// last; with no layers it is the identity map.
class InstanceEncoder {
 public:
  InstanceEncoder(std::vector<std::size_t> sizes, Activation activation,
                  std::vector<DenseLayer> layers)
      : sizes_(std::move(sizes)), activation_(activation), layers_(std::move(layers)) {
    if (sizes_.empty()) throw UsageError("encoder needs at least an input size");
    if (layers_.size() + 1 != sizes_.size()) {
      throw ShapeError("encoder has " + std::to_string(layers_.size()) + " layers for " +
                       std::to_string(sizes_.size()) + " sizes");
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (layers_[l].in() != sizes_[l] || layers_[l].out() != sizes_[l + 1] ||
          layers_[l].bias.size() != sizes_[l + 1]) {
        throw ShapeError("encoder layer " + std::to_string(l) + " has wrong dimensions");
      }
    }
  }

  static InstanceEncoder random(std::vector<std::size_t> sizes, Activation activation,
                                Rng& rng) {
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      layers.push_back(DenseLayer::init(sizes[l], sizes[l + 1], rng));
    }
    return InstanceEncoder(std::move(sizes), activation, std::move(layers));
  }

  static InstanceEncoder identity(std::size_t dim) {
    return InstanceEncoder({dim}, Activation::kIdentity, {});
  }

  std::size_t input_dim() const { return sizes_.front(); }
  /// d, the embedding width before the constant 1 is appended.
  std::size_t output_dim() const { return sizes_.back(); }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  Activation activation() const { return activation_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  /// h = H(x) for a vector or a batch of row vectors.
  Var embed(Binding& bind, Var x) const {
    if (x.value().cols() != input_dim()) {
      throw ShapeError("encoder expects width " + std::to_string(input_dim()) + ", got " +
                       to_string(x.shape()));
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      x = layers_[l].apply(bind, x);
      if (l + 1 < layers_.size()) x = activate(x, activation_);
    }
    return x;
  }

  /// h' = [H(x), 1].
  Var encode(Binding& bind, Var x) const { return append_ones(embed(bind, x)); }

  void collect(std::vector<Tensor*>& out) {
    for (DenseLayer& layer : layers_) {
      out.push_back(&layer.weights);
      out.push_back(&layer.bias);
    }
  }

 private:
  std::vector<std::size_t> sizes_;
  Activation activation_;
  std::vector<DenseLayer> layers_;
};

/// W [n x (d+1)]; row i is the embedding c_i of class i.
class ClassEmbeddingTable {
 public:
  explicit ClassEmbeddingTable(Tensor weights) : weights_(std::move(weights)) {
    if (weights_.rank() != 2) throw ShapeError("class table must be a matrix");
    if (weights_.rows() < 2) throw UsageError("class table needs at least two classes");
  }

  static ClassEmbeddingTable random(std::size_t classes, std::size_t width, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(width));
    Tensor w(Shape{classes, width});
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    return ClassEmbeddingTable(std::move(w));
  }

  std::size_t num_classes() const { return weights_.rows(); }
  std::size_t width() const { return weights_.cols(); }
  const Tensor& weights() const { return weights_; }
  Tensor& weights() { return weights_; }

  /// c_i as a plain vector.
  Tensor embedding(std::size_t i) const {
    if (i >= num_classes()) {
      throw UsageError("class index " + std::to_string(i) + " out of range for " +
                       std::to_string(num_classes()) + " classes");
    }
    auto r = weights_.row(i);
    return Tensor::vector({r.begin(), r.end()});
  }

 private:
  Tensor weights_;
};

/// Scores one (instance, class) embedding pair. MLP kinds use two relu hidden
/// layers of equal width and a linear scalar output.
class InteractionHead {
 public:
  InteractionHead(InteractionKind kind, std::size_t width, std::vector<DenseLayer> mlp)
      : kind_(kind), width_(width), mlp_(std::move(mlp)) {
    if (kind_ == InteractionKind::kDot) {
      if (!mlp_.empty()) throw UsageError("dot interaction has no parameters");
    } else if (mlp_.size() != 3 || mlp_[0].out() != width_ || mlp_[1].in() != width_ ||
               mlp_[1].out() != width_ || mlp_[2].in() != width_ || mlp_[2].out() != 1) {
      throw ShapeError("interaction MLP must be in -> width -> width -> 1");
    }
  }

  static InteractionHead dot() { return InteractionHead(InteractionKind::kDot, 0, {}); }

  /// embedding_width is d+1.
  static InteractionHead random(InteractionKind kind, std::size_t embedding_width,
                                std::size_t width, Rng& rng) {
    if (kind == InteractionKind::kDot) return dot();
    if (width == 0) throw UsageError("interaction MLP width must be positive");
    const std::size_t in =
        kind == InteractionKind::kLcMlp ? embedding_width : 2 * embedding_width;
    std::vector<DenseLayer> mlp;
    mlp.push_back(DenseLayer::init(in, width, rng));
    mlp.push_back(DenseLayer::init(width, width, rng));
    mlp.push_back(DenseLayer::init(width, 1, rng));
    return InteractionHead(kind, width, std::move(mlp));
  }

  InteractionKind kind() const { return kind_; }
  std::size_t width() const { return width_; }
  const std::vector<DenseLayer>& mlp() const { return mlp_; }
  std::vector<DenseLayer>& mlp() { return mlp_; }

  /// Required input width of the MLP given h' of width d+1; 0 for dot.
  std::size_t mlp_input(std::size_t embedding_width) const {
    switch (kind_) {
      case InteractionKind::kDot: return 0;
      case InteractionKind::kLcMlp: return embedding_width;
      case InteractionKind::kConcatMlp: return 2 * embedding_width;
    }
    return 0;
  }

  /// MLP over rows of x: [r x in] -> [r x 1], or [in] -> [1].
  Var run_mlp(Binding& bind, Var x) const {
    x = relu(mlp_[0].apply(bind, x));
    x = relu(mlp_[1].apply(bind, x));
    return mlp_[2].apply(bind, x);
  }

  /// Score of a single pair as a scalar node.
  Var interact(Binding& bind, Var h_prime, Var c) const {
    if (h_prime.value().size() != c.value().size()) {
      throw ShapeError("interaction widths differ: " + to_string(h_prime.shape()) +
                       " vs " + to_string(c.shape()));
    }
    switch (kind_) {
      case InteractionKind::kDot: return sum(mul(h_prime, c));
      case InteractionKind::kLcMlp: return reshape(run_mlp(bind, mul(h_prime, c)), {});
      case InteractionKind::kConcatMlp:
        return reshape(run_mlp(bind, concat(h_prime, c)), {});
    }
    throw UsageError("unhandled interaction kind");
  }

  /// Scores of every (instance row, class row) pair: [B x w] and [n x w] -> [B x n].
  Var score_pairs(Binding& bind, Var h_prime, Var classes) const {
    const std::size_t batch = h_prime.value().rows();
    const std::size_t n = classes.value().rows();
    switch (kind_) {
      case InteractionKind::kDot: return matmul_nt(h_prime, classes);
      case InteractionKind::kLcMlp:
        return reshape(run_mlp(bind, pair_product(h_prime, classes)), {batch, n});
      case InteractionKind::kConcatMlp:
        return reshape(run_mlp(bind, pair_concat(h_prime, classes)), {batch, n});
    }
    throw UsageError("unhandled interaction kind");
  }

  void collect(std::vector<Tensor*>& out) {
    for (DenseLayer& layer : mlp_) {
      out.push_back(&layer.weights);
      out.push_back(&layer.bias);
    }
  }

 private:
  InteractionKind kind_;
  std::size_t width_;
  std::vector<DenseLayer> mlp_;
};

/// Instance encoder, class embedding table and interaction head.
class RankingModel {
 public:
  RankingModel(InstanceEncoder encoder, ClassEmbeddingTable classes, InteractionHead head)
      : encoder_(std::move(encoder)), classes_(std::move(classes)), head_(std::move(head)) {
    const std::size_t width = encoder_.output_dim() + 1;
    if (classes_.width() != width) {
      throw ShapeError("class embeddings have width " + std::to_string(classes_.width()) +
                       ", encoder produces " + std::to_string(width));
    }
    if (head_.kind() != InteractionKind::kDot &&
        head_.mlp().front().in() != head_.mlp_input(width)) {
      throw ShapeError("interaction MLP input does not match embedding width");
    }
  }

  /// Seeded initialization: encoder, then class table, then head.
  static RankingModel random(const std::vector<std::size_t>& encoder_sizes,
                             Activation activation, std::size_t num_classes,
                             InteractionKind kind, std::size_t head_width, Rng& rng) {
    InstanceEncoder encoder = InstanceEncoder::random(encoder_sizes, activation, rng);
    const std::size_t width = encoder.output_dim() + 1;
    ClassEmbeddingTable classes = ClassEmbeddingTable::random(num_classes, width, rng);
    InteractionHead head = InteractionHead::random(kind, width, head_width, rng);
    return RankingModel(std::move(encoder), std::move(classes), std::move(head));
  }

  const InstanceEncoder& encoder() const { return encoder_; }
  InstanceEncoder& encoder() { return encoder_; }
  const ClassEmbeddingTable& classes() const { return classes_; }
  ClassEmbeddingTable& classes() { return classes_; }
  const InteractionHead& head() const { return head_; }
  InteractionHead& head() { return head_; }
  std::size_t num_classes() const { return classes_.num_classes(); }
  std::size_t input_dim() const { return encoder_.input_dim(); }

  /// Batched scores [B x n] for inputs [B x d0].
  Var forward(Binding& bind, Var x) const {
    return head_.score_pairs(bind, encoder_.encode(bind, x), bind(classes_.weights()));
  }

  /// s_i = interact(encode(x), c_i) for one input, one pair at a time.
  Var score_by_pairs(Binding& bind, Var x) const {
    Var h_prime = encoder_.encode(bind, x);
    Var table = bind(classes_.weights());
    std::vector<Var> scores;
    for (std::size_t i = 0; i < num_classes(); ++i) {
      scores.push_back(head_.interact(bind, h_prime, row(table, i)));
    }
    return stack(scores);
  }

  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    encoder_.collect(out);
    out.push_back(&classes_.weights());
    head_.collect(out);
    return out;
  }

  std::vector<const Tensor*> parameters() const {
    const auto mutable_params = const_cast<RankingModel*>(this)->parameters();
    return {mutable_params.begin(), mutable_params.end()};
  }

 private:
  InstanceEncoder encoder_;
  ClassEmbeddingTable classes_;
  InteractionHead head_;
};

/// Encoder followed by a dense layer s = W h + b; the classical MCC network.
class ClassicalClassifier {
 public:
  ClassicalClassifier(InstanceEncoder encoder, DenseLayer output)
      : encoder_(std::move(encoder)), output_(std::move(output)) {
    if (output_.in() != encoder_.output_dim()) {
      throw ShapeError("classifier layer does not match encoder width");
    }
  }

  /// Draws the same random stream as RankingModel::random with a dot head:
  /// the [n x (d+1)] matrix row by row, last column becoming the bias.
  static ClassicalClassifier random(const std::vector<std::size_t>& encoder_sizes,
                                    Activation activation, std::size_t num_classes,
                                    Rng& rng) {
    InstanceEncoder encoder = InstanceEncoder::random(encoder_sizes, activation, rng);
    ClassEmbeddingTable stacked =
        ClassEmbeddingTable::random(num_classes, encoder.output_dim() + 1, rng);
    return from_stacked(std::move(encoder), stacked.weights());
  }

  /// Splits W = [weights | bias].
  static ClassicalClassifier from_stacked(InstanceEncoder encoder, const Tensor& stacked) {
    const std::size_t d = encoder.output_dim();
    if (stacked.rank() != 2 || stacked.cols() != d + 1) {
      throw ShapeError("stacked classifier weights must be [n x (d+1)]");
    }
    const std::size_t n = stacked.rows();
    DenseLayer out{Tensor(Shape{n, d}), Tensor(Shape{n})};
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) out.weights.at(i, j) = stacked.at(i, j);
      out.bias[i] = stacked.at(i, d);
    }
    return ClassicalClassifier(std::move(encoder), std::move(out));
  }

  const InstanceEncoder& encoder() const { return encoder_; }
  const DenseLayer& output() const { return output_; }
  std::size_t num_classes() const { return output_.out(); }
  std::size_t input_dim() const { return encoder_.input_dim(); }

  /// [weights | bias] as one [n x (d+1)] matrix.
  Tensor stacked_weights() const {
    const std::size_t n = output_.out(), d = output_.in();
    Tensor w(Shape{n, d + 1});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) w.at(i, j) = output_.weights.at(i, j);
      w.at(i, d) = output_.bias[i];
    }
    return w;
  }

  Var forward(Binding& bind, Var x) const {
    return output_.apply(bind, encoder_.embed(bind, x));
  }

  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    encoder_.collect(out);
    out.push_back(&output_.weights);
    out.push_back(&output_.bias);
    return out;
  }

  std::vector<const Tensor*> parameters() const {
    const auto mutable_params = const_cast<ClassicalClassifier*>(this)->parameters();
    return {mutable_params.begin(), mutable_params.end()};
  }

 private:
  InstanceEncoder encoder_;
  DenseLayer output_;
};

/// The ranking view of a classical classifier: class table W, dot interaction.
/// Scores c_i^T h' equal e_i^T W h' = s_i.
inline RankingModel from_classical(const Tensor& stacked_weights, InstanceEncoder encoder) {
  return RankingModel(std::move(encoder), ClassEmbeddingTable(stacked_weights),
                      InteractionHead::dot());
}

inline RankingModel from_classical(const ClassicalClassifier& classifier) {
  return from_classical(classifier.stacked_weights(), classifier.encoder());
}

/// Forward pass without gradients; returns [B x n] for [B x d0] inputs.
template <typename Scorer>
Tensor predict(const Scorer& model, const Tensor& inputs) {
  Tape tape;
  Binding bind(tape, false);
  Var x = tape.constant(inputs);
  return model.forward(bind, x).value();
}

/// h' = [H(x), 1] for one input vector.
inline Tensor encode(const InstanceEncoder& encoder, const Tensor& x) {
  Tape tape;
  Binding bind(tape, false);
  return encoder.encode(bind, tape.constant(x)).value();
}

/// Score of one (h', c) pair.
inline double interact(const Tensor& h_prime, const Tensor& c, const InteractionHead& head) {
  Tape tape;
  Binding bind(tape, false);
  return head.interact(bind, tape.constant(h_prime), tape.constant(c)).value().item();
}

/// Scores of every class for one input vector.
template <typename Scorer>
Tensor score_all(const Scorer& model, const Tensor& x) {
  if (x.rank() != 1) throw ShapeError("score_all expects a single input vector");
  return predict(model, x.reshaped({1, x.size()})).reshaped({model.num_classes()});
}

}  // namespace rank4class

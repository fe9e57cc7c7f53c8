// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "rank4class/checkpoint.hpp"
#include "rank4class/data.hpp"
#include "rank4class/error.hpp"
#include "rank4class/losses.hpp"
#include "rank4class/metrics.hpp"
#include "rank4class/model.hpp"
#include "rank4class/optim.hpp"
#include "rank4class/report.hpp"

namespace rank4class {

enum class SelectionMetric { kTop1Error, kTop5Error, kNdcg5 };

inline std::string_view selection_name(SelectionMetric m) {
  switch (m) {
    case SelectionMetric::kTop1Error: return "top1_error";
    case SelectionMetric::kTop5Error: return "top5_error";
    case SelectionMetric::kNdcg5: return "ndcg5";
  }
  return "?";
}

inline SelectionMetric parse_selection(std::string_view name) {
  for (auto m : {SelectionMetric::kTop1Error, SelectionMetric::kTop5Error,
                 SelectionMetric::kNdcg5}) {
    if (name == selection_name(m)) return m;
  }
  throw UsageError("unknown selection metric '" + std::string(name) +
                   "' (valid: top1_error, top5_error, ndcg5)");
}

struct SynthSpec {
  std::size_t classes = 10;
  std::size_t dim = 20;
  std::size_t per_class = 700;
  double std_dev = 5.0;
};

/// Parses "n,d0,per_class,std".
inline SynthSpec parse_synth(std::string_view text) {
  std::vector<std::string> parts;
  std::stringstream ss{std::string(text)};
  std::string part;
  while (std::getline(ss, part, ',')) parts.push_back(part);
  if (parts.size() != 4) throw UsageError("--synth expects n,d0,per_class,std");
  try {
    SynthSpec s;
    std::size_t used = 0;
    auto whole = [&used](const std::string& p) {
      const long long v = std::stoll(p, &used);
      if (used != p.size() || v < 0) throw std::invalid_argument(p);
      return static_cast<std::size_t>(v);
    };
    s.classes = whole(parts[0]);
    s.dim = whole(parts[1]);
    s.per_class = whole(parts[2]);
    s.std_dev = std::stod(parts[3], &used);
    if (used != parts[3].size()) throw std::invalid_argument(parts[3]);
    return s;
  } catch (const std::exception&) {
    throw UsageError("--synth expects n,d0,per_class,std; got '" + std::string(text) + "'");
  }
}

struct ExperimentConfig {
  std::string data_path;  // empty: synthetic blobs
  SynthSpec synth;
  SplitFractions fractions{5.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0};
  LossParams loss;
  InteractionKind interaction = InteractionKind::kDot;
  std::size_t width = 64;
  std::vector<std::size_t> hidden = {64, 32};
  Activation activation = Activation::kRelu;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double lr = 3e-3;
  bool lr_sweep = false;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  SelectionMetric select = SelectionMetric::kNdcg5;
  std::size_t threads = 1;

  void validate() const {
    if (epochs < 1) throw UsageError("epochs must be at least 1");
    if (batch_size < 1) throw UsageError("batch size must be at least 1");
    if (width < 1) throw UsageError("width must be at least 1");
    if (threads < 1) throw UsageError("threads must be at least 1");
    if (!lr_sweep && !(lr > 0.0)) throw UsageError("learning rate must be positive");
    if (hidden.empty() || std::count(hidden.begin(), hidden.end(), 0u) > 0) {
      throw UsageError("encoder layer sizes must be positive");
    }
    loss.validate();
    if (data_path.empty()) {
      if (synth.classes < 2) throw UsageError("synthetic data needs at least two classes");
      if (synth.dim < 1 || synth.per_class < 1) throw UsageError("bad synthetic blob parameters");
      if (!(synth.std_dev >= 0.0)) throw UsageError("synthetic std must be nonnegative");
    }
  }

  std::string dataset_name() const {
    if (!data_path.empty()) {
      const auto slash = data_path.find_last_of('/');
      return slash == std::string::npos ? data_path : data_path.substr(slash + 1);
    }
    std::ostringstream out;
    out << "blobs-" << synth.classes << "x" << synth.dim;
    return out.str();
  }

  /// Canonical key=value echo, fixed key order. Grid echoes leave out the
  /// loss and interaction, which vary per cell.
  std::string echo(bool grid = false) const {
    using detail::format_double;
    std::ostringstream out;
    if (data_path.empty()) {
      out << "synth=" << synth.classes << ',' << synth.dim << ',' << synth.per_class << ','
          << format_double(synth.std_dev);
    } else {
      out << "data=" << data_path;
    }
    if (!grid) out << " loss=" << loss_name(loss.kind);
    out << " sigma=" << format_double(loss.sigma) << " alpha=" << format_double(loss.alpha)
        << " gumbel_samples=" << loss.gumbel_samples
        << " gumbel_scale=" << format_double(loss.gumbel_scale)
        << " mse_target=" << format_double(loss.mse_target);
    if (!grid) out << " interaction=" << interaction_name(interaction);
    out << " width=" << width << " opt=" << optimizer_name(optimizer)
        << " lr=" << (lr_sweep ? std::string("sweep") : format_double(lr)) << " epochs=" << epochs
        << " batch=" << batch_size << " select=" << selection_name(select);
    return out.str();
  }
};

/// Mean metrics over a set of instances, on the 0..1 scale.
struct EvalSummary {
  std::vector<std::size_t> ks;
  std::vector<double> top_k_accuracy;
  std::vector<double> ndcg;
  double mrr = 0.0;
  std::size_t count = 0;
};

/// Scores [N x n] against labels. A cutoff above n is clamped to n.
inline EvalSummary evaluate_scores(const Tensor& scores, std::span<const std::size_t> labels,
                                   std::span<const std::size_t> ks) {
  if (scores.rank() != 2 || scores.rows() != labels.size()) {
    throw ShapeError("evaluate: " + std::to_string(labels.size()) + " labels for scores " +
                     to_string(scores.shape()));
  }
  if (labels.empty()) throw UsageError("evaluate: no instances");
  const std::size_t n = scores.cols();
  EvalSummary out;
  out.count = labels.size();
  for (std::size_t k : ks) {
    if (k < 1) throw UsageError("evaluate: cutoffs must be at least 1");
    out.ks.push_back(std::min(k, n));
  }
  out.top_k_accuracy.assign(ks.size(), 0.0);
  out.ndcg.assign(ks.size(), 0.0);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] >= n) throw UsageError("evaluate: label out of range");
    const Ranking ranking = rank_classes(scores.row(r));
    const LabelVector y = LabelVector::one_hot(n, labels[r]);
    for (std::size_t i = 0; i < out.ks.size(); ++i) {
      out.top_k_accuracy[i] += top_k_accuracy(ranking, y, out.ks[i]);
      out.ndcg[i] += ndcg_at_k(ranking, y, out.ks[i]);
    }
    out.mrr += mrr(ranking, y);
  }
  const double count = static_cast<double>(labels.size());
  for (double& v : out.top_k_accuracy) v /= count;
  for (double& v : out.ndcg) v /= count;
  out.mrr /= count;
  return out;
}

/// The three reported metrics, x100.
struct GridMetrics {
  double top1_error = 0.0;
  double top5_error = 0.0;
  double ndcg5 = 0.0;

  double selection_value(SelectionMetric m) const {
    switch (m) {
      case SelectionMetric::kTop1Error: return top1_error;
      case SelectionMetric::kTop5Error: return top5_error;
      case SelectionMetric::kNdcg5: return ndcg5;
    }
    return 0.0;
  }
};

inline bool better(SelectionMetric m, double candidate, double incumbent) {
  return m == SelectionMetric::kNdcg5 ? candidate > incumbent : candidate < incumbent;
}

template <typename Scorer>
GridMetrics evaluate_model(const Scorer& model, const Dataset& data) {
  static constexpr std::size_t kCutoffs[] = {1, 5};
  const EvalSummary s = evaluate_scores(predict(model, data.features), data.labels, kCutoffs);
  return GridMetrics{100.0 * (1.0 - s.top_k_accuracy[0]), 100.0 * (1.0 - s.top_k_accuracy[1]),
                     100.0 * s.ndcg[1]};
}

struct TrainOptions {
  LossParams loss;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double lr = 3e-3;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  SelectionMetric select = SelectionMetric::kNdcg5;
};

template <typename Scorer>
struct TrainResult {
  Scorer best;
  std::size_t best_epoch = 0;  // 1-based
  GridMetrics validation;
  std::vector<double> epoch_loss;  // mean training loss per epoch
};

/// Minibatch training. After every epoch the model is scored on `val`; the
/// best epoch by `select` is kept, ties going to the earlier epoch.
template <typename Scorer>
TrainResult<Scorer> train_model(Scorer model, const Dataset& train, const Dataset& val,
                                const TrainOptions& opt) {
  if (opt.epochs < 1) throw UsageError("epochs must be at least 1");
  opt.loss.validate();
  train.validate();
  std::vector<Tensor*> params = model.parameters();
  OptimizerState state = OptimizerState::make(opt.optimizer, opt.lr, params);
  const std::uint64_t noise_stream = derive_seed(opt.seed, 0x6e6f697365ULL);
  std::uint64_t rows_seen = 0;

  std::optional<TrainResult<Scorer>> result;
  std::vector<double> epoch_loss;
  std::vector<Tensor> grads(params.size());
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    double loss_total = 0.0;
    const auto plan = batches(train, opt.batch_size, derive_seed(opt.seed, 0x62617463ULL), epoch);
    for (const auto& rows : plan) {
      const Dataset batch = subset(train, rows, "batch");
      Tape tape;
      Binding bind(tape, true);
      Var scores = model.forward(bind, tape.constant(batch.features));
      std::vector<Var> losses;
      losses.reserve(rows.size());
      for (std::size_t b = 0; b < rows.size(); ++b) {
        losses.push_back(ranking_loss(row(scores, b), batch.labels[b], opt.loss,
                                      derive_seed(noise_stream, rows_seen++)));
      }
      Var loss = mean(stack(losses));
      tape.backward(loss);
      for (std::size_t p = 0; p < params.size(); ++p) grads[p] = bind.grad(*params[p]);
      optimizer_step(state, params, grads);
      loss_total += loss.value().item() * static_cast<double>(rows.size());
    }
    epoch_loss.push_back(loss_total / static_cast<double>(train.size()));
    const GridMetrics metrics = evaluate_model(model, val);
    if (!result || better(opt.select, metrics.selection_value(opt.select),
                          result->validation.selection_value(opt.select))) {
      result.emplace(TrainResult<Scorer>{model, epoch + 1, metrics, {}});
    }
  }
  result->epoch_loss = std::move(epoch_loss);
  return std::move(*result);
}

inline Dataset load_dataset(const ExperimentConfig& config) {
  if (!config.data_path.empty()) return load_csv(config.data_path);
  Dataset d = synth_blobs(config.synth.classes, config.synth.dim, config.synth.per_class,
                          config.synth.std_dev, derive_seed(config.seed, 0x64617461ULL));
  d.name = config.dataset_name();
  return d;
}

inline DatasetSplit prepare_split(const ExperimentConfig& config) {
  return split(load_dataset(config), config.fractions, derive_seed(config.seed, 0x73706c74ULL));
}

inline std::vector<std::size_t> encoder_sizes(const ExperimentConfig& config, std::size_t d0) {
  std::vector<std::size_t> sizes{d0};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  return sizes;
}

/// The learning rates a config trains with: one, or the whole sweep grid.
inline std::vector<double> candidate_lrs(const ExperimentConfig& config) {
  return config.lr_sweep ? lr_grid() : std::vector<double>{config.lr};
}

struct CellOutcome {
  ReportRow row;
  RankingModel model;
  double lr = 0.0;
  std::size_t best_epoch = 0;
};

/// Trains `make_model()` once per candidate lr and keeps the run whose best
/// validation value wins; ties keep the smaller lr.
template <typename MakeModel>
auto train_with_selection(const ExperimentConfig& config, const DatasetSplit& data,
                          MakeModel make_model) {
  using Scorer = decltype(make_model());
  std::optional<TrainResult<Scorer>> best;
  double best_lr = 0.0;
  for (double lr : candidate_lrs(config)) {
    TrainOptions opt{config.loss, config.optimizer, lr, config.epochs, config.batch_size,
                     derive_seed(config.seed, 0x747261696eULL), config.select};
    TrainResult<Scorer> run = train_model(make_model(), data.train, data.val, opt);
    if (!best || better(config.select, run.validation.selection_value(config.select),
                        best->validation.selection_value(config.select))) {
      best.emplace(std::move(run));
      best_lr = lr;
    }
  }
  return std::pair{std::move(*best), best_lr};
}

inline ReportRow make_row(const ExperimentConfig& config, const GridMetrics& m,
                          std::string_view interaction) {
  return ReportRow{config.dataset_name(), std::string(loss_name(config.loss.kind)),
                   std::string(interaction), m.top1_error, m.top5_error, m.ndcg5};
}

/// One loss x interaction cell on an already prepared split.
inline CellOutcome run_cell(const ExperimentConfig& config, const DatasetSplit& data) {
  config.validate();
  const auto sizes = encoder_sizes(config, data.train.dim());
  const std::size_t n = data.train.num_classes;
  auto make = [&] {
    Rng rng(derive_seed(config.seed, 0x696e6974ULL));
    return RankingModel::random(sizes, config.activation, n, config.interaction, config.width,
                                rng);
  };
  auto [run, lr] = train_with_selection(config, data, make);
  const GridMetrics test = evaluate_model(run.best, data.test);
  return CellOutcome{make_row(config, test, interaction_name(config.interaction)),
                     std::move(run.best), lr, run.best_epoch};
}

/// The classical network (encoder + dense output layer) under the same
/// protocol, reported with interaction "classical" and converted to its
/// ranking view for checkpointing.
inline CellOutcome run_classical(const ExperimentConfig& config, const DatasetSplit& data) {
  config.validate();
  const auto sizes = encoder_sizes(config, data.train.dim());
  const std::size_t n = data.train.num_classes;
  auto make = [&] {
    Rng rng(derive_seed(config.seed, 0x696e6974ULL));
    return ClassicalClassifier::random(sizes, config.activation, n, rng);
  };
  auto [run, lr] = train_with_selection(config, data, make);
  const GridMetrics test = evaluate_model(run.best, data.test);
  return CellOutcome{make_row(config, test, "classical"), from_classical(run.best), lr,
                     run.best_epoch};
}

struct TrainOutput {
  ExperimentReport report;
  RankingModel model;
  double lr = 0.0;
  std::size_t best_epoch = 0;
};

inline TrainOutput cmd_train(const ExperimentConfig& config, bool classical = false) {
  config.validate();
  const DatasetSplit data = prepare_split(config);
  CellOutcome cell = classical ? run_classical(config, data) : run_cell(config, data);
  ExperimentReport report{{cell.row}, config.echo(), config.seed};
  return TrainOutput{std::move(report), std::move(cell.model), cell.lr, cell.best_epoch};
}

/// Every loss x interaction pair, losses outer, in declaration order.
inline std::vector<ExperimentConfig> grid_cells(const ExperimentConfig& base) {
  std::vector<ExperimentConfig> cells;
  for (LossKind loss : kAllLosses) {
    for (InteractionKind kind : kAllInteractions) {
      ExperimentConfig c = base;
      c.loss.kind = loss;
      c.interaction = kind;
      cells.push_back(c);
    }
  }
  return cells;
}

/// Runs the 15 cells, in parallel when config.threads > 1. Rows are merged in
/// cell order so the report does not depend on scheduling.
inline ExperimentReport cmd_grid(const ExperimentConfig& base) {
  base.validate();
  const DatasetSplit data = prepare_split(base);
  const std::vector<ExperimentConfig> cells = grid_cells(base);
  std::vector<std::optional<ReportRow>> rows(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  auto work = [&](std::size_t worker) {
    for (std::size_t i = worker; i < cells.size(); i += base.threads) {
      try {
        rows[i] = run_cell(cells[i], data).row;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (base.threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(base.threads, cells.size()); ++w) pool.emplace_back(work, w);
    for (std::thread& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  ExperimentReport report;
  report.config = base.echo(true);
  report.seed = base.seed;
  for (auto& r : rows) report.rows.push_back(std::move(*r));
  return report;
}

}  // namespace rank4class

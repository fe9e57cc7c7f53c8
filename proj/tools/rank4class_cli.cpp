// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rank4class/rank4class.hpp"

namespace r4c = rank4class;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitVerifyFailed = 2;

double parse_number(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw r4c::UsageError(what + ": not a number '" + text + "'");
}

void set_lr(r4c::ExperimentConfig& c, const std::string& text) {
  if (text == "sweep") {
    c.lr_sweep = true;
  } else {
    c.lr_sweep = false;
    c.lr = parse_number(text, "lr");
  }
}

void check_width(std::size_t width) {
  if (width != 64 && width != 128 && width != 256 && width != 512) {
    throw r4c::UsageError("width must be one of 64, 128, 256, 512");
  }
}

// Flags shared by train and grid. Every field is optional so that only the
// flags actually given override the config file.
struct ConfigFlags {
  std::string config_path;
  std::optional<std::string> data, synth, loss, interaction, opt, lr, select;
  std::optional<std::size_t> width, epochs, batch, threads, gumbel_samples;
  std::optional<std::uint64_t> seed;
  std::optional<double> sigma, alpha, gumbel_scale, mse_target;

  void add_to(CLI::App& app, bool with_cell) {
    app.add_option("--config", config_path, "JSON config file; flags override it");
    auto* data_opt = app.add_option("--data", data, "dataset CSV: label,f0,...");
    auto* synth_opt = app.add_option("--synth", synth, "synthetic blobs n,d0,per_class,std");
    data_opt->excludes(synth_opt);
    if (with_cell) {
      app.add_option("--loss", loss,
                     "softmax_ce|pair_logistic|approx_ndcg|gumbel_approx_ndcg|mse");
      app.add_option("--interaction", interaction, "dot|lc_mlp|concat_mlp");
    }
    app.add_option("--width", width, "interaction MLP width: 64|128|256|512");
    app.add_option("--opt", opt, "adam|adagrad");
    app.add_option("--lr", lr, "learning rate, or 'sweep' for the x3 grid");
    app.add_option("--epochs", epochs, "training epochs");
    app.add_option("--batch", batch, "minibatch size");
    app.add_option("--seed", seed, "seed for data, init, batching and noise");
    app.add_option("--select", select, "checkpoint selection: top1_error|top5_error|ndcg5");
    app.add_option("--sigma", sigma, "pair_logistic sigma");
    app.add_option("--alpha", alpha, "approx_ndcg temperature");
    app.add_option("--gumbel-samples", gumbel_samples, "gumbel_approx_ndcg sample count");
    app.add_option("--gumbel-scale", gumbel_scale, "gumbel_approx_ndcg noise scale");
    app.add_option("--mse-target", mse_target, "mse target for the correct class");
    app.add_option("--threads", threads, "worker threads for grid cells");
  }

  r4c::ExperimentConfig build() const {
    r4c::ExperimentConfig c;
    if (!config_path.empty()) apply_file(c);
    if (data) {
      c.data_path = *data;
    }
    if (synth) {
      c.synth = r4c::parse_synth(*synth);
      c.data_path.clear();
    }
    if (loss) c.loss.kind = r4c::parse_loss(*loss);
    if (interaction) c.interaction = r4c::parse_interaction(*interaction);
    if (width) c.width = *width;
    if (opt) c.optimizer = r4c::parse_optimizer(*opt);
    if (lr) set_lr(c, *lr);
    if (epochs) c.epochs = *epochs;
    if (batch) c.batch_size = *batch;
    if (seed) c.seed = *seed;
    if (select) c.select = r4c::parse_selection(*select);
    if (sigma) c.loss.sigma = *sigma;
    if (alpha) c.loss.alpha = *alpha;
    if (gumbel_samples) c.loss.gumbel_samples = *gumbel_samples;
    if (gumbel_scale) c.loss.gumbel_scale = *gumbel_scale;
    if (mse_target) c.loss.mse_target = *mse_target;
    if (threads) c.threads = *threads;
    check_width(c.width);
    c.validate();
    return c;
  }

  void apply_file(r4c::ExperimentConfig& c) const {
    std::ifstream in(config_path);
    if (!in) throw r4c::UsageError("cannot open config " + config_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw r4c::UsageError("config " + config_path + ": " + e.what());
    }
    if (!j.is_object()) throw r4c::UsageError("config must be a JSON object");
    try {
      for (const auto& [key, value] : j.items()) {
        if (key == "data") {
          c.data_path = value.get<std::string>();
        } else if (key == "synth") {
          c.synth = r4c::parse_synth(value.get<std::string>());
          c.data_path.clear();
        } else if (key == "loss") {
          c.loss.kind = r4c::parse_loss(value.get<std::string>());
        } else if (key == "interaction") {
          c.interaction = r4c::parse_interaction(value.get<std::string>());
        } else if (key == "width") {
          c.width = value.get<std::size_t>();
        } else if (key == "opt") {
          c.optimizer = r4c::parse_optimizer(value.get<std::string>());
        } else if (key == "lr") {
          if (value.is_string()) {
            set_lr(c, value.get<std::string>());
          } else {
            c.lr_sweep = false;
            c.lr = value.get<double>();
          }
        } else if (key == "epochs") {
          c.epochs = value.get<std::size_t>();
        } else if (key == "batch") {
          c.batch_size = value.get<std::size_t>();
        } else if (key == "seed") {
          c.seed = value.get<std::uint64_t>();
        } else if (key == "select") {
          c.select = r4c::parse_selection(value.get<std::string>());
        } else if (key == "sigma") {
          c.loss.sigma = value.get<double>();
        } else if (key == "alpha") {
          c.loss.alpha = value.get<double>();
        } else if (key == "gumbel_samples") {
          c.loss.gumbel_samples = value.get<std::size_t>();
        } else if (key == "gumbel_scale") {
          c.loss.gumbel_scale = value.get<double>();
        } else if (key == "mse_target") {
          c.loss.mse_target = value.get<double>();
        } else if (key == "threads") {
          c.threads = value.get<std::size_t>();
        } else {
          throw r4c::UsageError("config: unknown key '" + key + "'");
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw r4c::UsageError("config " + config_path + ": " + e.what());
    }
  }
};

struct OutputFlags {
  std::string out;
  std::string format = "csv";

  void add_to(CLI::App& app) {
    app.add_option("--out", out, "output path (default: stdout)");
    app.add_option("--format", format, "csv|md");
  }

  void emit(const r4c::ExperimentReport& report) const {
    const auto fmt = r4c::parse_report_format(format);
    if (out.empty()) {
      r4c::write_report(report, fmt, std::cout);
    } else {
      r4c::emit_report(report, out, fmt);
    }
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
}

std::vector<std::size_t> parse_cutoffs(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const double v = parse_number(part, "k");
    if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw r4c::UsageError("cutoffs must be positive integers");
    }
    ks.push_back(static_cast<std::size_t>(v));
  }
  if (ks.empty()) throw r4c::UsageError("no cutoffs given");
  return ks;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiclass classification as learning to rank"};
  app.require_subcommand(1);

  ConfigFlags train_flags;
  OutputFlags train_out;
  std::string checkpoint_path;
  bool classical = false;
  auto* train = app.add_subcommand("train", "train one loss x interaction configuration");
  train_flags.add_to(*train, true);
  train_out.add_to(*train);
  train->add_option("--checkpoint", checkpoint_path, "write the selected model here");
  train->add_flag("--classical", classical, "train the classical encoder + dense layer network");

  ConfigFlags grid_flags;
  OutputFlags grid_out;
  auto* grid = app.add_subcommand("grid", "train every loss x interaction cell");
  grid_flags.add_to(*grid, false);
  grid_out.add_to(*grid);

  std::vector<std::string> score_paths;
  std::string labels_path, cutoffs = "1,5", eval_out;
  auto* eval = app.add_subcommand("eval", "compare score files on ranking metrics");
  eval->add_option("--scores", score_paths, "score CSV (repeatable)")->required();
  eval->add_option("--labels", labels_path, "label CSV")->required();
  eval->add_option("--k", cutoffs, "comma-separated cutoffs (default 1,5)");
  eval->add_option("--out", eval_out, "output path (default: stdout)");

  std::uint64_t verify_seed = 0;
  std::size_t verify_trials = 1000, verify_seeds = 1;
  std::string fault, verify_out;
  auto* verify = app.add_subcommand("verify", "check the metric and loss properties");
  verify->add_option("--seed", verify_seed, "first seed");
  verify->add_option("--seeds", verify_seeds, "number of consecutive seeds");
  verify->add_option("--trials", verify_trials, "random cases per check and seed");
  verify->add_option("--out", verify_out, "output path (default: stdout)");
  verify->add_option("--inject-fault", fault)->group("");

  std::string report_in;
  OutputFlags report_out;
  report_out.format = "md";
  auto* report = app.add_subcommand("report", "re-render a CSV report");
  report->add_option("--in", report_in, "report CSV")->required();
  report_out.add_to(*report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train) {
      const auto config = train_flags.build();
      const auto result = r4c::cmd_train(config, classical);
      if (!checkpoint_path.empty()) r4c::save_checkpoint(result.model, checkpoint_path);
      train_out.emit(result.report);
    } else if (*grid) {
      grid_out.emit(r4c::cmd_grid(grid_flags.build()));
    } else if (*eval) {
      std::ostringstream text;
      r4c::write_eval(r4c::cmd_eval(score_paths, labels_path, parse_cutoffs(cutoffs)), text);
      write_text(eval_out, text.str());
    } else if (*verify) {
      r4c::EntropyFn entropy = r4c::metric_entropy;
      if (fault == "ln-entropy") {
        entropy = r4c::natural_log_entropy_fault;
      } else if (!fault.empty()) {
        throw r4c::UsageError("unknown fault '" + fault + "'");
      }
      if (verify_seeds < 1) throw r4c::UsageError("--seeds must be at least 1");
      std::ostringstream text;
      bool ok = true;
      for (std::size_t s = 0; s < verify_seeds; ++s) {
        const auto result = r4c::cmd_verify(verify_seed + s, verify_trials, entropy);
        r4c::write_verify(result, text);
        ok = ok && result.passed();
      }
      write_text(verify_out, text.str());
      return ok ? 0 : kExitVerifyFailed;
    } else if (*report) {
      report_out.emit(r4c::load_report_csv(report_in));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return 0;
}

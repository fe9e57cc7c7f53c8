// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "rank4class/checkpoint.hpp"
#include "rank4class/eval.hpp"
#include "rank4class/experiment.hpp"
#include "rank4class/report.hpp"
#include "rank4class/verify.hpp"

namespace rank4class {
namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.synth = SynthSpec{4, 5, 30, 1.0};
  c.fractions = SplitFractions{0.6, 0.2, 0.2};
  c.hidden = {8, 4};
  c.width = 8;
  c.epochs = 2;
  c.batch_size = 16;
  c.seed = 3;
  return c;
}

std::string source_path(const std::string& relative) {
  return std::string(RANK4CLASS_SOURCE_DIR) + "/" + relative;
}

TEST(Report, EmptyReportIsHeaderOnly) {
  const std::string csv = render_report(ExperimentReport{}, ReportFormat::kCsv);
  EXPECT_EQ(csv, std::string(kReportCsvHeader) + "\n");
}

TEST(Report, CsvRoundTripKeepsTwoDecimals) {
  ExperimentReport r;
  r.rows.push_back({"d", "softmax_ce", "dot", 12.3456, 1.0, 95.555});
  r.rows.push_back({"d", "mse", "lc_mlp", 10.0, 2.004, 96.0});
  std::istringstream in(render_report(r, ReportFormat::kCsv));
  const ExperimentReport back = read_report_csv(in);
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[0].top1_error, 12.35);
  EXPECT_EQ(back.rows[0].ndcg5, std::stod(format_metric(95.555)));
  EXPECT_EQ(back.rows[1].top5_error, 2.0);
  EXPECT_EQ(back.rows[1].interaction, "lc_mlp");
  EXPECT_EQ(render_report(back, ReportFormat::kCsv), render_report(r, ReportFormat::kCsv));
}

TEST(Report, BestMarksTiesAndDirection) {
  std::vector<ReportRow> rows{{"d", "a", "dot", 10.001, 3.0, 90.0},
                              {"d", "b", "dot", 10.004, 2.0, 91.0},
                              {"d", "c", "dot", 12.0, 2.0, 89.0}};
  const BestMarks m = best_marks(rows);
  EXPECT_EQ(m.top1_error, (std::vector<bool>{true, true, false}));
  EXPECT_EQ(m.top5_error, (std::vector<bool>{false, true, true}));
  EXPECT_EQ(m.ndcg5, (std::vector<bool>{false, true, false}));
}

TEST(Report, MarkdownBoldsBestCells) {
  ExperimentReport r;
  r.config = "k=v";
  r.seed = 7;
  r.rows.push_back({"d", "a", "dot", 10.0, 3.0, 90.0});
  r.rows.push_back({"d", "b", "dot", 11.0, 2.0, 91.0});
  const std::string md = render_report(r, ReportFormat::kMarkdown);
  EXPECT_NE(md.find("<!-- seed=7 k=v -->"), std::string::npos);
  EXPECT_NE(md.find("| d | a | dot | **10.00**\\* | 3.00 | 90.00 |"), std::string::npos);
  EXPECT_NE(md.find("| d | b | dot | 11.00 | **2.00**\\* | **91.00**\\* |"), std::string::npos);
}

TEST(Report, RejectsMalformedCsv) {
  std::istringstream bad_header("loss,top1\n");
  EXPECT_THROW(read_report_csv(bad_header), ParseError);
  std::istringstream bad_value(std::string(kReportCsvHeader) + "\nd,a,dot,x,1,2,\n");
  EXPECT_THROW(read_report_csv(bad_value), ParseError);
  std::istringstream short_row(std::string(kReportCsvHeader) + "\nd,a,dot,1,2\n");
  EXPECT_THROW(read_report_csv(short_row), SchemaError);
}

TEST(Evaluate, PerfectAndReversedScores) {
  const Tensor perfect = Tensor::matrix({{3, 2, 1, 0, -1, -2}, {0, 9, 1, 2, 3, 4}});
  const std::vector<std::size_t> labels{0, 1};
  const std::vector<std::size_t> ks{1, 5};
  const EvalSummary s = evaluate_scores(perfect, labels, ks);
  EXPECT_EQ(s.top_k_accuracy[0], 1.0);
  EXPECT_EQ(s.ndcg[1], 1.0);
  EXPECT_EQ(s.mrr, 1.0);
  const Tensor reversed = Tensor::matrix({{-3, 2, 1, 0, 5, 6}});
  const std::vector<std::size_t> first{0};
  EXPECT_EQ(evaluate_scores(reversed, first, ks).top_k_accuracy[1], 0.0);
}

TEST(Evaluate, CutoffClampedAndMismatchRejected) {
  const Tensor scores = Tensor::matrix({{1, 2, 3}});
  const std::vector<std::size_t> labels{0};
  const std::vector<std::size_t> ks{5};
  const EvalSummary s = evaluate_scores(scores, labels, ks);
  EXPECT_EQ(s.ks[0], 3u);
  EXPECT_EQ(s.top_k_accuracy[0], 1.0);
  const std::vector<std::size_t> two{0, 1};
  EXPECT_THROW(evaluate_scores(scores, two, ks), ShapeError);
}

TEST(Eval, TieFixtureTiesTopKButNotNdcg) {
  const auto result = cmd_eval({source_path("data/topk_tie/model_a.csv"),
                                source_path("data/topk_tie/model_b.csv")},
                               source_path("data/topk_tie/labels.csv"), {1, 5});
  const EvalSummary& a = result.files[0].summary;
  const EvalSummary& b = result.files[1].summary;
  EXPECT_EQ(a.top_k_accuracy, b.top_k_accuracy);
  EXPECT_GE(100.0 * (a.ndcg[1] - b.ndcg[1]), 1.0);
  std::ostringstream out;
  write_eval(result, out);
  EXPECT_NE(out.str().find("top1_error: tie"), std::string::npos);
  EXPECT_NE(out.str().find("top5_error: tie"), std::string::npos);
  EXPECT_NE(out.str().find("model_a.csv > "), std::string::npos);
}

TEST(Eval, RowCountMismatch) {
  std::vector<std::pair<std::string, Tensor>> scores{{"s", Tensor::matrix({{1, 2}, {2, 1}})}};
  EXPECT_THROW(evaluate_files(scores, {0}, {1}), UsageError);
  std::istringstream no_header("0\n1\n");
  EXPECT_THROW(read_labels_csv(no_header), ParseError);
}

TEST(Config, ValidationAndSynthParsing) {
  ExperimentConfig c = tiny_config();
  c.epochs = 0;
  EXPECT_THROW(c.validate(), UsageError);
  EXPECT_THROW(parse_synth("10,20"), UsageError);
  EXPECT_THROW(parse_synth("10,x,5,1"), UsageError);
  const SynthSpec s = parse_synth("10,20,700,5.5");
  EXPECT_EQ(s.per_class, 700u);
  EXPECT_EQ(s.std_dev, 5.5);
  EXPECT_THROW(parse_selection("ndcg"), UsageError);
}

TEST(Train, DeterministicReportAndCheckpoint) {
  const ExperimentConfig c = tiny_config();
  const TrainOutput a = cmd_train(c);
  const TrainOutput b = cmd_train(c);
  EXPECT_EQ(render_report(a.report, ReportFormat::kCsv), render_report(b.report, ReportFormat::kCsv));
  EXPECT_EQ(render_report(a.report, ReportFormat::kMarkdown),
            render_report(b.report, ReportFormat::kMarkdown));
  std::ostringstream ca, cb;
  save_checkpoint(a.model, ca);
  save_checkpoint(b.model, cb);
  EXPECT_EQ(ca.str(), cb.str());
  ExperimentConfig other = c;
  other.seed = 4;
  std::ostringstream co;
  save_checkpoint(cmd_train(other).model, co);
  EXPECT_NE(co.str(), ca.str());
}

TEST(Train, EveryLossAndInteractionRuns) {
  for (const ExperimentConfig& c : grid_cells(tiny_config())) {
    const TrainOutput out = cmd_train(c);
    ASSERT_EQ(out.report.rows.size(), 1u);
    const ReportRow& r = out.report.rows[0];
    EXPECT_EQ(r.loss, loss_name(c.loss.kind));
    EXPECT_EQ(r.interaction, interaction_name(c.interaction));
    for (double v : {r.top1_error, r.top5_error, r.ndcg5}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 100.0);
    }
    EXPECT_GE(out.best_epoch, 1u);
    EXPECT_LE(out.best_epoch, c.epochs);
  }
}

TEST(Train, DotSoftmaxMatchesClassicalBaseline) {
  ExperimentConfig c = tiny_config();
  c.epochs = 3;
  const TrainOutput ranking = cmd_train(c);
  const TrainOutput classical = cmd_train(c, true);
  const ReportRow& a = ranking.report.rows[0];
  const ReportRow& b = classical.report.rows[0];
  EXPECT_EQ(b.interaction, "classical");
  EXPECT_EQ(a.top1_error, b.top1_error);
  EXPECT_EQ(a.top5_error, b.top5_error);
  EXPECT_EQ(a.ndcg5, b.ndcg5);
  std::ostringstream ca, cb;
  save_checkpoint(ranking.model, ca);
  save_checkpoint(classical.model, cb);
  EXPECT_EQ(ca.str(), cb.str());
}

TEST(Train, SelectionKeepsBestValidationEpoch) {
  const ExperimentConfig c = tiny_config();
  const DatasetSplit data = prepare_split(c);
  Rng rng(1);
  const RankingModel start = RankingModel::random({5, 8, 4}, Activation::kRelu, 4,
                                                  InteractionKind::kDot, 8, rng);
  TrainOptions opt;
  opt.epochs = 6;
  opt.batch_size = 16;
  const auto result = train_model(start, data.train, data.val, opt);
  EXPECT_EQ(result.epoch_loss.size(), 6u);
  const GridMetrics again = evaluate_model(result.best, data.val);
  EXPECT_EQ(again.ndcg5, result.validation.ndcg5);
  // The first best_epoch epochs replay the same trajectory.
  TrainOptions shorter = opt;
  shorter.epochs = result.best_epoch;
  const auto prefix = train_model(start, data.train, data.val, shorter);
  EXPECT_EQ(prefix.validation.ndcg5, result.validation.ndcg5);
}

TEST(Train, LearningRateSweepPicksAGridValue) {
  ExperimentConfig c = tiny_config();
  c.epochs = 1;
  c.lr_sweep = true;
  const TrainOutput out = cmd_train(c);
  const auto grid = lr_grid();
  EXPECT_NE(std::find(grid.begin(), grid.end(), out.lr), grid.end());
  EXPECT_NE(out.report.config.find("lr=sweep"), std::string::npos);
}

TEST(Train, BlobBaselineReachesRegressionBound) {
  ExperimentConfig c;
  c.epochs = 50;
  const TrainOutput out = cmd_train(c);
  EXPECT_LE(out.report.rows[0].top1_error, 15.0);
}

TEST(Grid, FifteenRowsInFixedOrderWithStars) {
  ExperimentConfig c = tiny_config();
  c.epochs = 1;
  const ExperimentReport report = cmd_grid(c);
  ASSERT_EQ(report.rows.size(), 15u);
  EXPECT_EQ(report.rows.front().loss, "softmax_ce");
  EXPECT_EQ(report.rows.front().interaction, "dot");
  EXPECT_EQ(report.rows.back().loss, "mse");
  EXPECT_EQ(report.rows.back().interaction, "concat_mlp");
  const BestMarks m = best_marks(report.rows);
  for (const auto* column : {&m.top1_error, &m.top5_error, &m.ndcg5}) {
    EXPECT_GE(std::count(column->begin(), column->end(), true), 1);
  }
  EXPECT_EQ(report.config.find("loss="), std::string::npos);

  ExperimentConfig threaded = c;
  threaded.threads = 4;
  EXPECT_EQ(render_report(cmd_grid(threaded), ReportFormat::kCsv),
            render_report(report, ReportFormat::kCsv));
}

TEST(Verify, PassesAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const VerifyReport r = cmd_verify(seed, 1000);
    EXPECT_TRUE(r.passed()) << seed;
    ASSERT_EQ(r.checks.size(), 4u);
    for (const CheckResult& c : r.checks) EXPECT_GE(c.cases, 1000u);
  }
  EXPECT_THROW(cmd_verify(0, 0), UsageError);
}

TEST(Verify, DegenerateDistributionIsEqualityCase) {
  const PositionDistribution top({1.0, 0.0, 0.0});
  for (std::size_t k = 1; k <= 3; ++k) {
    const MetricEntropy h = metric_entropy(top, k);
    EXPECT_EQ(h.ndcg_bits, h.accuracy_bits);
    EXPECT_EQ(h.ndcg_bits, 0.0);
  }
}

TEST(Verify, NaturalLogFaultIsCaught) {
  const VerifyReport r = cmd_verify(0, 1000, natural_log_entropy_fault);
  EXPECT_FALSE(r.passed());
  EXPECT_FALSE(r.checks[0].passed);
  EXPECT_FALSE(r.checks[0].counterexample.empty());
  std::ostringstream out;
  write_verify(r, out);
  EXPECT_NE(out.str().find("FAIL entropy_order"), std::string::npos);
  EXPECT_NE(out.str().find("counterexample"), std::string::npos);
}

}  // namespace
}  // namespace rank4class

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "eegvid/eegio.hpp"
#include "eegvid/net.hpp"
#include "eegvid/pipeline.hpp"

namespace eegvid {

enum class Method { cnn_rnn_lstm, cnn_rnn_gru, csp_lda };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

// Stratified assignment of trial indices to k folds; deterministic given seed, per-class
// counts across folds differ by at most one.
struct FoldPlan {
  int k = 10;
  std::uint64_t seed = 0;
  std::vector<std::vector<int>> folds;
};

FoldPlan make_folds(const std::vector<int>& labels, int k, std::uint64_t seed);

struct EvalReport {
  std::string method;
  std::vector<double> fold_acc;  // percent
  double mean = 0.0;
  double stddev = 0.0;  // population
  TrainLog log;         // training log of the last fold, empty for untrained methods
};

// Returns the accuracy (percent) of one fold given train/test trial indices.
using FoldRunner =
    std::function<double(const Recording&, const std::vector<int>&, const std::vector<int>&, int)>;

// Harness entry used by both the real pipelines and classifier stubs in tests.
// jobs > 1 runs folds concurrently; results are assembled by fold index.
EvalReport cross_validate_with(const Recording& rec, const FoldPlan& plan,
                               const FoldRunner& runner, const std::string& label, int jobs = 1);

// Every fold-fitted parameter, flattened in a fixed order; lets tests probe that the
// train side is untouched by test-fold contents.
struct FoldArtifacts {
  std::vector<double> dae;
  std::vector<double> baseline;
  std::vector<float> net;
};

EvalReport cross_validate(const Recording& rec, Method method, int k, std::uint64_t seed,
                          const PipelineConfig& pcfg = {}, const NetConfig& ncfg = {},
                          int jobs = 1, std::vector<FoldArtifacts>* artifacts = nullptr);

// Rows are methods, columns the fold accuracies plus Avg and Std, all %.2f.
std::string format_table(const std::vector<EvalReport>& reports);

// The same %.2f values as the table, one "method,column,value" row per cell.
void write_report_csv(const std::vector<EvalReport>& reports, const std::string& path);

// Step-2 per-epoch training accuracy (percent), 1-based epochs.
std::vector<std::pair<int, double>> epoch_curve(const TrainLog& log);

void write_epoch_csv(const TrainLog& log, const std::string& path);

}  // namespace eegvid

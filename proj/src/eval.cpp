#include "eegvid/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "eegvid/dsp.hpp"

namespace eegvid {
namespace {

std::uint64_t fold_seed(std::uint64_t base, int fold) {
  return base ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(fold + 1));
}

std::vector<int> train_indices(const FoldPlan& plan, int test_fold, int n_trials) {
  std::vector<bool> is_test(static_cast<std::size_t>(n_trials), false);
  for (int idx : plan.folds[static_cast<std::size_t>(test_fold)])
    is_test[static_cast<std::size_t>(idx)] = true;
  std::vector<int> train;
  train.reserve(static_cast<std::size_t>(n_trials));
  for (int i = 0; i < n_trials; ++i)
    if (!is_test[static_cast<std::size_t>(i)]) train.push_back(i);
  return train;
}

void append(std::vector<double>& out, const MatD& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(m(r, c));
}

void append(std::vector<float>& out, const MatF& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(m(r, c));
}

std::vector<double> dump_dae(const DaeParams& dae) {
  std::vector<double> out;
  append(out, dae.w_enc);
  append(out, MatD(dae.b_enc));
  append(out, MatD(dae.b_dec));
  return out;
}

std::vector<double> dump_baseline(const BaselineModel& model) {
  std::vector<double> out;
  for (const CspModel& csp : model.csp)
    for (const MatD& filt : csp.filters) append(out, filt);
  append(out, model.lda.means);
  append(out, model.lda.cov_inv);
  append(out, MatD(model.lda.log_priors));
  return out;
}

std::vector<float> dump_net(const NetParamsT<float>& p) {
  std::vector<float> out;
  append(out, p.conv1.w);
  append(out, MatF(p.conv1.b));
  append(out, p.conv2.w);
  append(out, MatF(p.conv2.b));
  append(out, p.rnn1.wx);
  append(out, p.rnn1.wh);
  append(out, MatF(p.rnn1.b));
  append(out, p.rnn2.wx);
  append(out, p.rnn2.wh);
  append(out, MatF(p.rnn2.b));
  append(out, p.dense.w);
  append(out, MatF(p.dense.b));
  append(out, p.head.w);
  append(out, MatF(p.head.b));
  return out;
}

struct FoldOutcome {
  double accuracy = 0.0;
  TrainLog log;
  FoldArtifacts artifacts;
};

FoldOutcome run_method_fold(const Recording& preprocessed, Method method,
                            const std::vector<int>& train, const std::vector<int>& test,
                            std::uint64_t seed, const PipelineConfig& pcfg,
                            const NetConfig& ncfg) {
  FoldOutcome out;
  const FittedPipeline fp = fit_pipeline(preprocessed, train, pcfg, seed);
  out.artifacts.dae = dump_dae(fp.dae);

  if (method == Method::csp_lda) {
    const std::map<Band, Recording> bands = denoised_bands(fp, preprocessed);
    const BaselineModel model = fit_baseline(bands, train, pcfg.csp_m);
    out.artifacts.baseline = dump_baseline(model);
    int hits = 0;
    for (int idx : test)
      if (predict_baseline(model, bands, idx) ==
          preprocessed.trials[static_cast<std::size_t>(idx)].label)
        ++hits;
    out.accuracy = 100.0 * hits / static_cast<double>(test.size());
    return out;
  }

  NetConfig cfg = ncfg;
  cfg.cell = method == Method::cnn_rnn_lstm ? RnnCell::lstm : RnnCell::gru;
  cfg.seed = seed;
  cfg.in_channels = 7;
  cfg.image = kFrameSize;
  cfg.n_classes = preprocessed.n_classes();

  const std::vector<TrainSample> samples = featurize(fp, preprocessed);
  std::vector<TrainSample> train_set;
  train_set.reserve(train.size());
  for (int idx : train) train_set.push_back(samples[static_cast<std::size_t>(idx)]);

  const NetParamsT<float> params = train_two_step(train_set, cfg, &out.log);
  out.artifacts.net = dump_net(params);

  int hits = 0;
  for (int idx : test)
    if (predict(params, samples[static_cast<std::size_t>(idx)].seq) ==
        preprocessed.trials[static_cast<std::size_t>(idx)].label)
      ++hits;
  out.accuracy = 100.0 * hits / static_cast<double>(test.size());
  return out;
}

void finalize_stats(EvalReport& report) {
  const double n = static_cast<double>(report.fold_acc.size());
  report.mean = std::accumulate(report.fold_acc.begin(), report.fold_acc.end(), 0.0) / n;
  double var = 0.0;
  for (double a : report.fold_acc) var += (a - report.mean) * (a - report.mean);
  report.stddev = std::sqrt(var / n);
}

std::string cell_text(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  return buf;
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::cnn_rnn_lstm: return "cnn-rnn-lstm";
    case Method::cnn_rnn_gru: return "cnn-rnn-gru";
    default: return "csp-lda";
  }
}

Method method_from_name(const std::string& name) {
  if (name == "cnn-rnn-lstm") return Method::cnn_rnn_lstm;
  if (name == "cnn-rnn-gru") return Method::cnn_rnn_gru;
  if (name == "csp-lda") return Method::csp_lda;
  throw std::invalid_argument("unknown method: " + name);
}

FoldPlan make_folds(const std::vector<int>& labels, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("need k >= 2");
  int n_classes = 0;
  for (int label : labels) {
    if (label < 0) throw std::invalid_argument("negative label");
    n_classes = std::max(n_classes, label + 1);
  }
  if (n_classes < 1 || labels.empty()) throw std::invalid_argument("empty label set");

  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(n_classes));
  for (int i = 0; i < static_cast<int>(labels.size()); ++i)
    by_class[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].push_back(i);
  for (const auto& members : by_class)
    if (static_cast<int>(members.size()) < k)
      throw std::invalid_argument("class with fewer trials than folds");

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.assign(static_cast<std::size_t>(k), {});
  std::mt19937_64 rng(seed);
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i = 0; i < members.size(); ++i)
      plan.folds[i % static_cast<std::size_t>(k)].push_back(members[i]);
  }
  for (auto& fold : plan.folds) std::sort(fold.begin(), fold.end());
  return plan;
}

EvalReport cross_validate_with(const Recording& rec, const FoldPlan& plan,
                               const FoldRunner& runner, const std::string& label, int jobs) {
  const int n = static_cast<int>(rec.trials.size());
  EvalReport report;
  report.method = label;
  report.fold_acc.assign(static_cast<std::size_t>(plan.k), 0.0);

  const int workers = std::max(1, jobs);
  for (int start = 0; start < plan.k; start += workers) {
    const int stop = std::min(plan.k, start + workers);
    std::vector<std::future<double>> wave;
    wave.reserve(static_cast<std::size_t>(stop - start));
    for (int f = start; f < stop; ++f) {
      wave.push_back(std::async(std::launch::async, [&, f] {
        return runner(rec, train_indices(plan, f, n), plan.folds[static_cast<std::size_t>(f)], f);
      }));
    }
    for (int f = start; f < stop; ++f)
      report.fold_acc[static_cast<std::size_t>(f)] = wave[static_cast<std::size_t>(f - start)].get();
  }
  finalize_stats(report);
  return report;
}

EvalReport cross_validate(const Recording& rec, Method method, int k, std::uint64_t seed,
                          const PipelineConfig& pcfg, const NetConfig& ncfg, int jobs,
                          std::vector<FoldArtifacts>* artifacts) {
  validate_recording(rec);
  std::vector<int> labels;
  labels.reserve(rec.trials.size());
  for (const Trial& t : rec.trials) labels.push_back(t.label);
  const FoldPlan plan = make_folds(labels, k, seed);

  const Recording preprocessed = preprocess(rec, pcfg.bandpass);

  std::vector<FoldOutcome> outcomes(static_cast<std::size_t>(k));
  const int n = static_cast<int>(rec.trials.size());
  const int workers = std::max(1, jobs);
  for (int start = 0; start < k; start += workers) {
    const int stop = std::min(k, start + workers);
    std::vector<std::future<FoldOutcome>> wave;
    wave.reserve(static_cast<std::size_t>(stop - start));
    for (int f = start; f < stop; ++f) {
      wave.push_back(std::async(std::launch::async, [&, f] {
        return run_method_fold(preprocessed, method, train_indices(plan, f, n),
                               plan.folds[static_cast<std::size_t>(f)], fold_seed(seed, f), pcfg,
                               ncfg);
      }));
    }
    for (int f = start; f < stop; ++f)
      outcomes[static_cast<std::size_t>(f)] = wave[static_cast<std::size_t>(f - start)].get();
  }

  EvalReport report;
  report.method = method_name(method);
  report.fold_acc.reserve(static_cast<std::size_t>(k));
  for (const FoldOutcome& out : outcomes) report.fold_acc.push_back(out.accuracy);
  report.log = outcomes.back().log;
  finalize_stats(report);
  if (artifacts) {
    artifacts->clear();
    for (FoldOutcome& out : outcomes) artifacts->push_back(std::move(out.artifacts));
  }
  return report;
}

std::string format_table(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("no reports");
  const std::size_t k = reports.front().fold_acc.size();
  for (const EvalReport& r : reports)
    if (r.fold_acc.size() != k) throw std::invalid_argument("inconsistent column counts");

  std::size_t name_width = std::string("Method").size();
  for (const EvalReport& r : reports) name_width = std::max(name_width, r.method.size());

  std::ostringstream out;
  out << std::left;
  out.width(static_cast<std::streamsize>(name_width));
  out << "Method";
  auto cell = [&](const std::string& text) {
    out << "  ";
    out.width(7);
    out << std::right << text;
  };
  for (std::size_t f = 1; f <= k; ++f) cell("F" + std::to_string(f));
  cell("Avg");
  cell("Std");
  out << '\n';

  for (const EvalReport& r : reports) {
    out << std::left;
    out.width(static_cast<std::streamsize>(name_width));
    out << r.method;
    for (double a : r.fold_acc) cell(cell_text(a));
    cell(cell_text(r.mean));
    cell(cell_text(r.stddev));
    out << '\n';
  }
  return out.str();
}

void write_report_csv(const std::vector<EvalReport>& reports, const std::string& path) {
  if (reports.empty()) throw std::invalid_argument("no reports");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "method,column,accuracy_pct\n";
  for (const EvalReport& r : reports) {
    for (std::size_t f = 0; f < r.fold_acc.size(); ++f)
      out << r.method << ",F" << f + 1 << ',' << cell_text(r.fold_acc[f]) << '\n';
    out << r.method << ",Avg," << cell_text(r.mean) << '\n';
    out << r.method << ",Std," << cell_text(r.stddev) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<std::pair<int, double>> epoch_curve(const TrainLog& log) {
  if (log.rnn_acc.empty()) throw std::invalid_argument("empty training log");
  std::vector<std::pair<int, double>> curve;
  curve.reserve(log.rnn_acc.size());
  for (std::size_t e = 0; e < log.rnn_acc.size(); ++e)
    curve.emplace_back(static_cast<int>(e) + 1, 100.0 * log.rnn_acc[e]);
  return curve;
}

void write_epoch_csv(const TrainLog& log, const std::string& path) {
  const auto curve = epoch_curve(log);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "epoch,accuracy_pct\n";
  char buf[64];
  for (const auto& [epoch, acc] : curve) {
    std::snprintf(buf, sizeof buf, "%d,%.17g\n", epoch, acc);
    out << buf;
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace eegvid

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "eegvid/eval.hpp"

namespace fs = std::filesystem;
using namespace eegvid;

namespace {

std::optional<RhythmBand> parse_band(const std::string& name) {
  if (name == "broadband") return std::nullopt;
  for (const RhythmBand& band : rhythm_bands())
    if (name == band_name(band.name)) return band;
  throw CLI::ValidationError("--band", "unknown band: " + name);
}

// Band-filtered (or broadband) compressed 12-frame video of one trial.
EegVideo trial_video(const Recording& rec, int trial, const std::optional<RhythmBand>& band) {
  if (trial < 0 || trial >= static_cast<int>(rec.trials.size()))
    throw std::invalid_argument("trial index out of range");
  const Recording pre = preprocess(rec);
  const Recording source = band ? filter_band(pre, *band) : pre;
  const ProjectedLayout proj = aep_project(rec.layout);
  const EegVideo video =
      make_video(source.trials[static_cast<std::size_t>(trial)].samples.cast<double>(), proj);
  EegVideo compressed = compress_video(video);
  if (band) compressed.band = *band;
  compressed.label = rec.trials[static_cast<std::size_t>(trial)].label;
  return compressed;
}

std::string frame_name(const char* stem, int index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%02d.%s", stem, index, ext);
  return buf;
}

int cmd_synth(std::uint64_t seed, int classes, int per_class, double rate, double dur,
              double amplitude, double noise, const std::string& output) {
  SynthOptions opt;
  opt.amplitude = amplitude;
  opt.noise_sigma = noise;
  const Recording rec =
      synth_recording(seed, classes, per_class, standard_layout_22(), rate, dur, opt);
  write_recording(rec, output);
  std::cout << "wrote " << output << ": " << rec.trials.size() << " trials, "
            << rec.n_channels() << " channels, " << rec.n_samples() << " samples at "
            << rec.sample_rate << " Hz\n";
  return 0;
}

int cmd_frames(const std::string& input, int trial, const std::string& band_str,
               const std::string& outdir) {
  const EegVideo video = trial_video(read_recording(input), trial, parse_band(band_str));

  double lo = video.frames.front().minCoeff();
  double hi = video.frames.front().maxCoeff();
  for (const Frame& f : video.frames) {
    lo = std::min(lo, f.minCoeff());
    hi = std::max(hi, f.maxCoeff());
  }
  if (!(lo < hi)) {
    lo -= 0.5;
    hi += 0.5;
  }

  fs::create_directories(outdir);
  for (int i = 0; i < static_cast<int>(video.frames.size()); ++i) {
    const fs::path path = fs::path(outdir) / frame_name("frame", i, "pgm");
    frame_to_pgm(video.frames[static_cast<std::size_t>(i)], lo, hi, path.string());
  }
  std::cout << "wrote " << video.frames.size() << " frames to " << outdir << '\n';
  return 0;
}

int cmd_flow(const std::string& input, int trial, const std::string& band_str,
             const std::string& outdir, double max_mag) {
  const EegVideo video = trial_video(read_recording(input), trial, parse_band(band_str));

  fs::create_directories(outdir);
  const int pairs = static_cast<int>(video.frames.size()) - 1;
  for (int i = 0; i < pairs; ++i) {
    const FlowField field = estimate_flow(video.frames[static_cast<std::size_t>(i)],
                                          video.frames[static_cast<std::size_t>(i) + 1]);
    const fs::path path = fs::path(outdir) / frame_name("flow", i, "ppm");
    write_ppm(flow_to_hsv_image(field, max_mag), path.string());
  }
  std::cout << "wrote " << pairs << " flow images to " << outdir << '\n';
  return 0;
}

int cmd_train(const std::string& input, const std::string& cell, std::uint64_t seed,
              const std::string& checkpoint, std::string curve_csv, const NetConfig& overrides,
              const PipelineConfig& pcfg) {
  const Recording rec = read_recording(input);
  validate_recording(rec);
  if (curve_csv.empty()) curve_csv = checkpoint + ".epochs.csv";

  NetConfig cfg = overrides;
  cfg.cell = cell_from_name(cell);
  cfg.seed = seed;
  cfg.n_classes = rec.n_classes();

  const Recording pre = preprocess(rec, pcfg.bandpass);
  std::vector<int> all(rec.trials.size());
  for (int i = 0; i < static_cast<int>(all.size()); ++i) all[static_cast<std::size_t>(i)] = i;

  const FittedPipeline fp = fit_pipeline(pre, all, pcfg, seed);
  const std::vector<TrainSample> samples = featurize(fp, pre);

  TrainLog log;
  const NetParams params = train_two_step(samples, cfg, &log);
  save_checkpoint(params, checkpoint);
  write_epoch_csv(log, curve_csv);

  int hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (predict(params, samples[i].seq) == rec.trials[i].label) ++hits;
  std::printf("training accuracy: %.4f (%d/%zu)\n",
              static_cast<double>(hits) / static_cast<double>(samples.size()), hits,
              samples.size());
  std::cout << "wrote " << checkpoint << " and " << curve_csv << '\n';
  return 0;
}

int cmd_eval(const std::string& input, const std::vector<std::string>& methods, int k,
             std::uint64_t seed, int jobs, const std::string& csv, const std::string& curve_csv,
             const NetConfig& ncfg, const PipelineConfig& pcfg) {
  const Recording rec = read_recording(input);

  std::vector<EvalReport> reports;
  reports.reserve(methods.size());
  for (const std::string& name : methods)
    reports.push_back(cross_validate(rec, method_from_name(name), k, seed, pcfg, ncfg, jobs));

  std::cout << format_table(reports);
  write_report_csv(reports, csv);
  std::cout << "wrote " << csv << '\n';
  if (!curve_csv.empty()) {
    for (const EvalReport& r : reports) {
      if (!r.log.rnn_acc.empty()) {
        write_epoch_csv(r.log, curve_csv);
        std::cout << "wrote " << curve_csv << '\n';
        break;
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG-video classification pipeline"};
  app.require_subcommand(1);

  // synth
  std::uint64_t seed = 0;
  int classes = 4, per_class = 10;
  double rate = 250.0, dur = 2.0, amplitude = 1.0, noise = 0.5;
  std::string output;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic ERF recording");
  synth->add_option("--seed", seed, "RNG seed");
  synth->add_option("--classes", classes, "number of classes")->check(CLI::PositiveNumber);
  synth->add_option("--per-class", per_class, "trials per class")->check(CLI::PositiveNumber);
  synth->add_option("--rate", rate, "sample rate, Hz")->check(CLI::PositiveNumber);
  synth->add_option("--dur", dur, "trial duration, s")->check(CLI::PositiveNumber);
  synth->add_option("--amplitude", amplitude, "source amplitude");
  synth->add_option("--noise", noise, "additive noise sigma");
  synth->add_option("-o,--output", output, "output ERF path")->required();

  // frames
  std::string input, band = "broadband", outdir = ".";
  int trial = 0;
  CLI::App* frames = app.add_subcommand("frames", "export 12 compressed frames as PGM");
  frames->add_option("-i,--input", input, "input ERF path")
      ->required()
      ->check(CLI::ExistingFile);
  const std::vector<std::string> band_names = {"broadband", "alpha", "beta",
                                               "gamma",     "delta", "theta"};
  frames->add_option("--trial", trial, "trial index");
  frames->add_option("--band", band, "broadband|alpha|beta|gamma|delta|theta")
      ->check(CLI::IsMember(band_names));
  frames->add_option("-o,--outdir", outdir, "output directory");

  // flow
  double max_mag = 2.0;
  CLI::App* flow = app.add_subcommand("flow", "export flow visualizations as PPM");
  flow->add_option("-i,--input", input, "input ERF path")->required()->check(CLI::ExistingFile);
  flow->add_option("--trial", trial, "trial index");
  flow->add_option("--band", band, "broadband|alpha|beta|gamma|delta|theta")
      ->check(CLI::IsMember(band_names));
  flow->add_option("-o,--outdir", outdir, "output directory");
  flow->add_option("--max-mag", max_mag, "flow magnitude mapped to full value")
      ->check(CLI::PositiveNumber);

  // shared training knobs
  NetConfig ncfg;
  PipelineConfig pcfg;
  std::string cell = "lstm", checkpoint, curve_csv;
  auto add_train_opts = [&](CLI::App* cmd) {
    cmd->add_option("--lr", ncfg.lr, "SGD learning rate");
    cmd->add_option("--epochs-cnn", ncfg.epochs_cnn, "step-1 epochs");
    cmd->add_option("--epochs-rnn", ncfg.epochs_rnn, "step-2 epochs");
    cmd->add_option("--batch", ncfg.batch, "minibatch size")->check(CLI::PositiveNumber);
    cmd->add_option("--stride", pcfg.cnn_frame_stride, "step-1 frame stride")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--dae-epochs", pcfg.dae_epochs, "denoiser training epochs");
  };

  // train
  CLI::App* train = app.add_subcommand("train", "two-step training on a whole recording");
  train->add_option("-i,--input", input, "input ERF path")->required()->check(CLI::ExistingFile);
  train->add_option("--cell", cell, "lstm|gru")->check(CLI::IsMember({"lstm", "gru"}));
  train->add_option("--seed", seed, "RNG seed");
  train->add_option("-o,--checkpoint", checkpoint, "checkpoint output path")->required();
  train->add_option("--curve", curve_csv, "epoch curve CSV path");
  add_train_opts(train);

  // eval
  std::vector<std::string> methods;
  int k = 10, jobs = 1;
  std::string csv = "eval.csv";
  CLI::App* eval = app.add_subcommand("eval", "stratified k-fold cross validation");
  eval->add_option("-i,--input", input, "input ERF path")->required()->check(CLI::ExistingFile);
  eval->add_option("-m,--method", methods, "cnn-rnn-lstm|cnn-rnn-gru|csp-lda (repeatable)")
      ->required()
      ->check(CLI::IsMember({"cnn-rnn-lstm", "cnn-rnn-gru", "csp-lda"}));
  eval->add_option("-k,--folds", k, "fold count")->check(CLI::PositiveNumber);
  eval->add_option("--seed", seed, "fold/model seed");
  eval->add_option("--jobs", jobs, "max concurrent folds")->check(CLI::PositiveNumber);
  eval->add_option("--csv", csv, "per-fold accuracy CSV path");
  eval->add_option("--curve", curve_csv, "epoch curve CSV path (first trained method)");
  add_train_opts(eval);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(seed, classes, per_class, rate, dur, amplitude, noise, output);
    if (frames->parsed()) return cmd_frames(input, trial, band, outdir);
    if (flow->parsed()) return cmd_flow(input, trial, band, outdir, max_mag);
    if (train->parsed())
      return cmd_train(input, cell, seed, checkpoint, curve_csv, ncfg, pcfg);
    if (eval->parsed()) return cmd_eval(input, methods, k, seed, jobs, csv, curve_csv, ncfg, pcfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

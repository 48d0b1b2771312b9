#include "eegvid/pipeline.hpp"

#include <cmath>
#include <stdexcept>

namespace eegvid {
namespace {

// Flat frames are spatial row-major columns, matching both raster_weights' pixel order
// and the network's image layout.
MatD compress_flat(const MatD& flat, const std::array<int, 13>& bounds) {
  MatD out(flat.rows(), 12);
  for (int i = 0; i < 12; ++i) {
    VecD acc = VecD::Zero(flat.rows());
    for (int t = bounds[static_cast<std::size_t>(i)]; t < bounds[static_cast<std::size_t>(i) + 1];
         ++t)
      acc += flat.col(t);
    out.col(i) = acc / static_cast<double>(bounds[static_cast<std::size_t>(i) + 1] -
                                           bounds[static_cast<std::size_t>(i)]);
  }
  return out;
}

Frame unflatten(const VecD& flat) {
  return Eigen::Map<const Eigen::Matrix<double, kFrameSize, kFrameSize, Eigen::RowMajor>>(
      flat.data());
}

Eigen::RowVectorXf flatten_frame_f(const Frame& frame) {
  const Eigen::Matrix<double, kFrameSize, kFrameSize, Eigen::RowMajor> rm = frame;
  return Eigen::Map<const Eigen::RowVectorXd>(rm.data(), rm.size()).cast<float>();
}

}  // namespace

FittedPipeline fit_pipeline(const Recording& preprocessed, const std::vector<int>& train_idx,
                            const PipelineConfig& cfg, std::uint64_t seed) {
  if (train_idx.empty()) throw std::invalid_argument("empty training fold");
  const int channels = preprocessed.n_channels();
  const int samples = preprocessed.n_samples();

  FittedPipeline fp;
  fp.cfg = cfg;
  fp.proj = aep_project(preprocessed.layout);
  fp.weights = raster_weights(fp.proj);

  MatD clean(channels, static_cast<Eigen::Index>(train_idx.size()) * samples);
  for (std::size_t i = 0; i < train_idx.size(); ++i) {
    const Trial& trial = preprocessed.trials[static_cast<std::size_t>(train_idx[i])];
    clean.middleCols(static_cast<Eigen::Index>(i) * samples, samples) =
        trial.samples.cast<double>();
  }

  double mean_std = 0.0;
  for (int c = 0; c < channels; ++c) {
    const auto row = clean.row(c);
    mean_std += std::sqrt((row.array() - row.mean()).square().mean());
  }
  mean_std /= channels;

  const int hidden = cfg.dae_hidden > 0 ? cfg.dae_hidden : (channels + 1) / 2;
  fp.dae = dae_train(clean, hidden, cfg.dae_noise_scale * mean_std, cfg.dae_epochs, cfg.dae_lr,
                     seed);
  return fp;
}

std::map<Band, Recording> denoised_bands(const FittedPipeline& fp, const Recording& preprocessed,
                                         Recording* denoised_out) {
  Recording denoised = preprocessed;
  for (Trial& trial : denoised.trials) {
    const MatD columns = trial.samples.cast<double>();
    trial.samples = dae_apply(fp.dae, columns).cast<float>();
  }
  std::map<Band, Recording> bands = filterbank(denoised);
  if (denoised_out) *denoised_out = std::move(denoised);
  return bands;
}

TrainSample featurize_trial(const FittedPipeline& fp, const Recording& denoised,
                            const std::map<Band, Recording>& bands, int trial) {
  const int total = denoised.n_samples();
  const auto bounds = segment_bounds(total);

  // One GEMM per video: weights (1024 x C) times trial (C x T).
  const MatD flat_broad =
      fp.weights * denoised.trials[static_cast<std::size_t>(trial)].samples.cast<double>();
  std::array<MatD, 5> flat_band;
  std::array<MatD, 5> comp_band;
  int b = 0;
  for (const RhythmBand& rb : rhythm_bands()) {
    const Recording& band_rec = bands.at(rb.name);
    flat_band[static_cast<std::size_t>(b)] =
        fp.weights * band_rec.trials[static_cast<std::size_t>(trial)].samples.cast<double>();
    comp_band[static_cast<std::size_t>(b)] =
        compress_flat(flat_band[static_cast<std::size_t>(b)], bounds);
    ++b;
  }
  const MatD comp_broad = compress_flat(flat_broad, bounds);

  // Flow on the compressed broadband video: 11 fields, last repeated for step 12.
  std::array<PolyExpansion, 12> expansions;
  for (int t = 0; t < 12; ++t)
    expansions[static_cast<std::size_t>(t)] = poly_expand(unflatten(comp_broad.col(t)),
                                                          fp.cfg.flow.sigma);
  std::array<std::array<Frame, 2>, 11> flow_planes;
  for (int t = 0; t < 11; ++t) {
    const FlowField field = estimate_flow(expansions[static_cast<std::size_t>(t)],
                                          expansions[static_cast<std::size_t>(t) + 1],
                                          fp.cfg.flow);
    flow_planes[static_cast<std::size_t>(t)] = flow_channels(field, fp.cfg.flow_max_mag);
  }

  TrainSample sample;
  sample.seq.label = denoised.trials[static_cast<std::size_t>(trial)].label;
  sample.seq.steps.reserve(kSeqLen);
  for (int t = 0; t < kSeqLen; ++t) {
    ImageT<float> step(7, kFrameSize * kFrameSize);
    for (int band_i = 0; band_i < 5; ++band_i)
      step.row(band_i) =
          comp_band[static_cast<std::size_t>(band_i)].col(t).transpose().cast<float>();
    const auto& planes = flow_planes[static_cast<std::size_t>(std::min(t, 10))];
    step.row(5) = flatten_frame_f(planes[0]);
    step.row(6) = flatten_frame_f(planes[1]);
    sample.seq.steps.push_back(std::move(step));
  }

  const int stride = std::max(1, fp.cfg.cnn_frame_stride);
  int segment = 0;
  for (int tau = 0; tau < total; tau += stride) {
    while (tau >= bounds[static_cast<std::size_t>(segment) + 1]) ++segment;
    ImageT<float> frame(7, kFrameSize * kFrameSize);
    for (int band_i = 0; band_i < 5; ++band_i)
      frame.row(band_i) =
          flat_band[static_cast<std::size_t>(band_i)].col(tau).transpose().cast<float>();
    const auto& planes = flow_planes[static_cast<std::size_t>(std::min(segment, 10))];
    frame.row(5) = flatten_frame_f(planes[0]);
    frame.row(6) = flatten_frame_f(planes[1]);
    sample.frames.push_back(std::move(frame));
  }
  return sample;
}

std::vector<TrainSample> featurize(const FittedPipeline& fp, const Recording& preprocessed) {
  Recording denoised;
  const std::map<Band, Recording> bands = denoised_bands(fp, preprocessed, &denoised);
  std::vector<TrainSample> samples;
  samples.reserve(preprocessed.trials.size());
  for (int i = 0; i < static_cast<int>(preprocessed.trials.size()); ++i)
    samples.push_back(featurize_trial(fp, denoised, bands, i));
  return samples;
}

BaselineModel fit_baseline(const std::map<Band, Recording>& bands,
                           const std::vector<int>& train_idx, int csp_m) {
  if (train_idx.empty()) throw std::invalid_argument("empty training fold");
  BaselineModel model;
  std::vector<int> labels;
  labels.reserve(train_idx.size());

  for (const RhythmBand& rb : rhythm_bands()) {
    const Recording& band_rec = bands.at(rb.name);
    std::vector<MatD> trials;
    trials.reserve(train_idx.size());
    for (int idx : train_idx)
      trials.push_back(band_rec.trials[static_cast<std::size_t>(idx)].samples.cast<double>());
    if (labels.empty())
      for (int idx : train_idx)
        labels.push_back(band_rec.trials[static_cast<std::size_t>(idx)].label);
    model.csp.push_back(csp_fit(trials, labels, csp_m));
  }

  MatD feats(static_cast<Eigen::Index>(model.csp.size()) * 2 * csp_m *
                 model.csp[0].n_classes(),
             static_cast<Eigen::Index>(train_idx.size()));
  for (std::size_t i = 0; i < train_idx.size(); ++i)
    feats.col(static_cast<Eigen::Index>(i)) = baseline_features(model, bands, train_idx[i]);
  model.lda = lda_fit(feats, labels);
  return model;
}

VecD baseline_features(const BaselineModel& model, const std::map<Band, Recording>& bands,
                       int trial) {
  std::vector<VecD> parts;
  parts.reserve(model.csp.size());
  Eigen::Index dim = 0;
  std::size_t b = 0;
  for (const RhythmBand& rb : rhythm_bands()) {
    const Recording& band_rec = bands.at(rb.name);
    parts.push_back(csp_features(model.csp[b],
                                 band_rec.trials[static_cast<std::size_t>(trial)].samples
                                     .cast<double>()));
    dim += parts.back().size();
    ++b;
  }
  VecD feat(dim);
  Eigen::Index at = 0;
  for (const VecD& part : parts) {
    feat.segment(at, part.size()) = part;
    at += part.size();
  }
  return feat;
}

int predict_baseline(const BaselineModel& model, const std::map<Band, Recording>& bands,
                     int trial) {
  return lda_predict(model.lda, baseline_features(model, bands, trial));
}

}  // namespace eegvid

#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "eegvid/baseline.hpp"
#include "eegvid/dsp.hpp"
#include "eegvid/eegio.hpp"
#include "eegvid/flow.hpp"
#include "eegvid/imaging.hpp"
#include "eegvid/net.hpp"

namespace eegvid {

struct PipelineConfig {
  BandpassSpec bandpass{};
  int dae_hidden = 0;            // 0 -> (channels + 1) / 2
  double dae_noise_scale = 0.1;  // corruption sigma = scale * mean per-channel std
  int dae_epochs = 15;
  double dae_lr = 0.02;
  int cnn_frame_stride = 8;  // stride over fully-sampled frames for step-1 tensors
  double flow_max_mag = 2.0; // pixels/frame mapped to magnitude 1
  FlowConfig flow{};
  int csp_m = 2;
};

// Fold-fitted preprocessing state. The projection and raster weights depend only on the
// montage; the DAE is learned from the training trials alone.
struct FittedPipeline {
  PipelineConfig cfg;
  DaeParams dae;
  ProjectedLayout proj;
  MatD weights;  // 1024 x channels
};

// rec must already be bandpass-preprocessed.
FittedPipeline fit_pipeline(const Recording& preprocessed, const std::vector<int>& train_idx,
                            const PipelineConfig& cfg, std::uint64_t seed);

// DAE-denoises every trial and splits the result into the five rhythm bands.
// Returned recordings are aligned with rec.trials.
std::map<Band, Recording> denoised_bands(const FittedPipeline& fp, const Recording& preprocessed,
                                         Recording* denoised = nullptr);

// Full network-facing featurization of one trial: 12-step sequence (band frames plus
// flow channels from the compressed broadband video) and strided fully-sampled frames.
TrainSample featurize_trial(const FittedPipeline& fp, const Recording& denoised,
                            const std::map<Band, Recording>& bands, int trial);

std::vector<TrainSample> featurize(const FittedPipeline& fp, const Recording& preprocessed);

// Classical path on the same fold-fitted denoising: per-band one-vs-rest CSP features
// concatenated across the five rhythm bands, classified with LDA.
struct BaselineModel {
  std::vector<CspModel> csp;  // one per band, rhythm_bands() order
  LdaModel lda;
};

BaselineModel fit_baseline(const std::map<Band, Recording>& bands,
                           const std::vector<int>& train_idx, int csp_m);

VecD baseline_features(const BaselineModel& model, const std::map<Band, Recording>& bands,
                       int trial);

int predict_baseline(const BaselineModel& model, const std::map<Band, Recording>& bands,
                     int trial);

}  // namespace eegvid

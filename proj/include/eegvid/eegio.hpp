#pragma once

#include "eegvid/types.hpp"

#include <string>
#include <vector>

namespace eegvid {

/// Names and unit-sphere positions of the recording montage.
struct ElectrodeLayout {
  std::vector<std::string> names;
  std::vector<Eigen::Vector3d> positions;

  int size() const { return static_cast<int>(names.size()); }
};

/// One trial: channels x time sample matrix plus its class label.
struct Trial {
  MatF samples;
  int label = 0;
};

struct Recording {
  ElectrodeLayout layout;
  double sample_rate = 0.0;
  std::vector<Trial> trials;

  int n_channels() const { return layout.size(); }
  int n_samples() const { return trials.empty() ? 0 : static_cast<int>(trials.front().samples.cols()); }
  int n_classes() const;
};

/// Throws std::invalid_argument if any Recording invariant is violated.
void validate_recording(const Recording& rec);

/// Reads an ERF file (JSON manifest line + little-endian f32 payload).
Recording read_recording(const std::string& path);

/// Writes an ERF file; bytes are deterministic for identical input.
void write_recording(const Recording& rec, const std::string& path);

/// The 22-electrode montage (Fz..POz diamond grid) on the unit sphere.
ElectrodeLayout standard_layout_22();

struct SynthOptions {
  double amplitude = 1.0;
  double noise_sigma = 0.5;
};

/// Deterministic class-separable EEG generator. Each class is a sinusoidal
/// source at a class-specific rhythm frequency, mixed through a class-specific
/// scalp gain pattern, plus white Gaussian noise.
Recording synth_recording(std::uint64_t seed, int n_classes, int trials_per_class,
                          const ElectrodeLayout& layout, double sample_rate,
                          double duration_s, const SynthOptions& opt = {});

}  // namespace eegvid

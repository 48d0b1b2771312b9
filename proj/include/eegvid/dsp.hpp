#pragma once

#include "eegvid/eegio.hpp"
#include "eegvid/types.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>

namespace eegvid {

struct BandpassSpec {
  double low_hz = 0.5;
  double high_hz = 50.0;
  int order = 4;  // analog prototype order per pass direction
};

enum class Band { Alpha, Beta, Gamma, Delta, Theta };

struct RhythmBand {
  Band name;
  double low_hz;
  double high_hz;
};

/// The five canonical rhythm bands, fixed: a 8-13, b 14-30, g 31-51, d 0.5-3, th 4-7 Hz.
const std::array<RhythmBand, 5>& rhythm_bands();
const char* band_name(Band b);

/// Second-order section of an IIR cascade (direct form II transposed).
struct Biquad {
  double b0, b1, b2;
  double a1, a2;
};

/// Bilinear-transform Butterworth bandpass as a cascade of biquads.
std::vector<Biquad> design_butter_bandpass(const BandpassSpec& spec, double sample_rate);

/// Zero-phase (forward-backward) Butterworth bandpass. Output length equals
/// input length; needs at least 6*order+1 samples for the reflective padding.
VecD butter_bandpass(const BandpassSpec& spec, double sample_rate, const VecD& signal);

/// Applies the 0.5-50 Hz preprocessing bandpass to every channel of every trial.
Recording preprocess(const Recording& rec, const BandpassSpec& spec = {});

/// Zero-phase bandpass of one rhythm band (order 4 per direction), with a
/// band-specific Nyquist error message.
Recording filter_band(const Recording& rec, const RhythmBand& band);

/// Band-filters every trial with each of the five rhythm filters.
std::map<Band, Recording> filterbank(const Recording& rec);

/// Tied-weight denoising autoencoder acting on per-timepoint channel vectors.
/// Decoder weight is w_enc transposed; hidden activation tanh, output identity.
struct DaeParams {
  MatD w_enc;   // hidden x input
  VecD b_enc;   // hidden
  VecD b_dec;   // input
  double noise_sigma = 0.0;

  MatD w_dec() const { return w_enc.transpose(); }
  int input_dim() const { return static_cast<int>(w_enc.cols()); }
  int hidden_dim() const { return static_cast<int>(w_enc.rows()); }
};

/// Trains the DAE by mini-batch gradient descent on mean-squared reconstruction
/// of clean columns from Gaussian-corrupted inputs. Deterministic given seed.
/// If epoch_loss is given it receives the mean minibatch loss of every epoch.
DaeParams dae_train(const MatD& clean, int hidden, double noise_sigma, int epochs, double lr,
                    std::uint64_t seed, int batch = 32, std::vector<double>* epoch_loss = nullptr);

VecD dae_apply(const DaeParams& p, const VecD& x);
MatD dae_apply(const DaeParams& p, const MatD& columns);

/// Reconstruction loss of clean targets (no fresh corruption): used for both
/// training diagnostics and the finite-difference gradient check.
double dae_loss(const DaeParams& p, const MatD& batch);

/// Compares analytic gradients of dae_loss against central finite differences;
/// returns the max per-group relative error. eps must lie in [1e-7, 1e-3].
double dae_grad_check(const DaeParams& p, const MatD& batch, double eps);

}  // namespace eegvid

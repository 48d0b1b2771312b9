#include "eegvid/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace eegvid {

namespace {

using cplx = std::complex<double>;

// Steady-state DF2T state for a unit constant input; scaled by the first
// sample it removes the startup transient of each pass.
std::pair<double, double> section_zi(const Biquad& s) {
  const double denom = 1.0 + s.a1 + s.a2;
  const double yss = (s.b0 + s.b1 + s.b2) / denom;
  const double z2 = s.b2 - s.a2 * yss;
  const double z1 = s.b1 - s.a1 * yss + z2;
  return {z1, z2};
}

void sosfilt_inplace(const std::vector<Biquad>& sos, VecD& x) {
  for (const Biquad& s : sos) {
    auto [z1s, z2s] = section_zi(s);
    double z1 = z1s * x[0];
    double z2 = z2s * x[0];
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double u = x[i];
      const double y = s.b0 * u + z1;
      z1 = s.b1 * u - s.a1 * y + z2;
      z2 = s.b2 * u - s.a2 * y;
      x[i] = y;
    }
  }
}

VecD filtfilt(const std::vector<Biquad>& sos, const VecD& x, int pad) {
  const Eigen::Index n = x.size();
  VecD ext(n + 2 * pad);
  for (int i = 0; i < pad; ++i) ext[i] = 2.0 * x[0] - x[pad - i];
  ext.segment(pad, n) = x;
  for (int i = 0; i < pad; ++i) ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];

  sosfilt_inplace(sos, ext);
  ext.reverseInPlace();
  sosfilt_inplace(sos, ext);
  ext.reverseInPlace();
  return ext.segment(pad, n);
}

Recording filter_recording(const Recording& rec, const std::vector<Biquad>& sos, int pad) {
  Recording out;
  out.layout = rec.layout;
  out.sample_rate = rec.sample_rate;
  out.trials.reserve(rec.trials.size());
  for (const Trial& t : rec.trials) {
    if (t.samples.cols() <= pad) throw std::invalid_argument("signal too short for zero-phase padding");
    Trial ft;
    ft.label = t.label;
    ft.samples.resize(t.samples.rows(), t.samples.cols());
    for (Eigen::Index c = 0; c < t.samples.rows(); ++c) {
      const VecD row = t.samples.row(c).cast<double>();
      ft.samples.row(c) = filtfilt(sos, row, pad).cast<float>();
    }
    out.trials.push_back(std::move(ft));
  }
  return out;
}

}  // namespace

const std::array<RhythmBand, 5>& rhythm_bands() {
  static const std::array<RhythmBand, 5> bands = {{{Band::Alpha, 8.0, 13.0},
                                                   {Band::Beta, 14.0, 30.0},
                                                   {Band::Gamma, 31.0, 51.0},
                                                   {Band::Delta, 0.5, 3.0},
                                                   {Band::Theta, 4.0, 7.0}}};
  return bands;
}

const char* band_name(Band b) {
  switch (b) {
    case Band::Alpha: return "alpha";
    case Band::Beta: return "beta";
    case Band::Gamma: return "gamma";
    case Band::Delta: return "delta";
    case Band::Theta: return "theta";
  }
  return "?";
}

std::vector<Biquad> design_butter_bandpass(const BandpassSpec& spec, double sample_rate) {
  if (spec.order < 1) throw std::invalid_argument("filter order must be >= 1");
  if (!(spec.low_hz > 0.0) || !(spec.low_hz < spec.high_hz) || !(spec.high_hz < sample_rate / 2.0))
    throw std::invalid_argument("bandpass cutoffs must satisfy 0 < low < high < Nyquist");

  const int n = spec.order;
  const double fs2 = 2.0 * sample_rate;
  const double wl = fs2 * std::tan(std::numbers::pi * spec.low_hz / sample_rate);
  const double wh = fs2 * std::tan(std::numbers::pi * spec.high_hz / sample_rate);
  const double w0 = std::sqrt(wl * wh);
  const double bw = wh - wl;

  // Analog prototype poles -> bandpass poles -> bilinear transform.
  std::vector<cplx> zpoles;
  zpoles.reserve(2 * n);
  for (int k = 0; k < n; ++k) {
    const cplx p = std::exp(cplx(0.0, std::numbers::pi * (2.0 * k + n + 1.0) / (2.0 * n)));
    const cplx bp = bw * p;
    const cplx disc = std::sqrt(bp * bp - 4.0 * w0 * w0);
    for (const cplx s : {0.5 * (bp + disc), 0.5 * (bp - disc)}) {
      zpoles.push_back((fs2 + s) / (fs2 - s));
    }
  }

  // Each section carries one zero at z=1 and one at z=-1: b = g*[1, 0, -1].
  std::vector<Biquad> sos;
  std::vector<cplx> reals;
  std::sort(zpoles.begin(), zpoles.end(),
            [](const cplx& a, const cplx& b) { return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag(); });
  for (const cplx& p : zpoles) {
    if (std::abs(p.imag()) <= 1e-10) {
      reals.push_back(p);
    } else if (p.imag() > 0.0) {
      sos.push_back({1.0, 0.0, -1.0, -2.0 * p.real(), std::norm(p)});
    }
  }
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    const double r1 = reals[i].real(), r2 = reals[i + 1].real();
    sos.push_back({1.0, 0.0, -1.0, -(r1 + r2), r1 * r2});
  }

  // Normalize so the cascade has unit gain at the (warped) center frequency.
  const double omega0 = 2.0 * std::atan(w0 / fs2);
  const cplx zinv = std::exp(cplx(0.0, -omega0));
  cplx h(1.0, 0.0);
  for (const Biquad& s : sos)
    h *= (s.b0 + s.b1 * zinv + s.b2 * zinv * zinv) / (1.0 + s.a1 * zinv + s.a2 * zinv * zinv);
  const double g = std::pow(1.0 / std::abs(h), 1.0 / static_cast<double>(sos.size()));
  for (Biquad& s : sos) {
    s.b0 *= g;
    s.b1 *= g;
    s.b2 *= g;
  }
  return sos;
}

VecD butter_bandpass(const BandpassSpec& spec, double sample_rate, const VecD& signal) {
  const auto sos = design_butter_bandpass(spec, sample_rate);
  const int pad = 6 * spec.order;  // 3x the digital filter order
  if (signal.size() <= pad) throw std::invalid_argument("signal too short for zero-phase padding");
  return filtfilt(sos, signal, pad);
}

Recording preprocess(const Recording& rec, const BandpassSpec& spec) {
  validate_recording(rec);
  const auto sos = design_butter_bandpass(spec, rec.sample_rate);
  return filter_recording(rec, sos, 6 * spec.order);
}

Recording filter_band(const Recording& rec, const RhythmBand& band) {
  validate_recording(rec);
  BandpassSpec spec{band.low_hz, band.high_hz, 4};
  std::vector<Biquad> sos;
  try {
    sos = design_butter_bandpass(spec, rec.sample_rate);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument(std::string(band_name(band.name)) +
                                " band edge reaches Nyquist at this sample rate");
  }
  return filter_recording(rec, sos, 6 * spec.order);
}

std::map<Band, Recording> filterbank(const Recording& rec) {
  std::map<Band, Recording> out;
  for (const RhythmBand& band : rhythm_bands()) out.emplace(band.name, filter_band(rec, band));
  return out;
}

namespace {

struct DaeGrads {
  MatD w;
  VecD b_enc;
  VecD b_dec;
};

// Reconstruction-of-clean loss and its analytic gradients. `inputs` may be a
// corrupted copy of `targets`; both contributions of the tied weight are summed.
double dae_backward(const DaeParams& p, const MatD& inputs, const MatD& targets, DaeGrads* g) {
  const double batch = static_cast<double>(inputs.cols());
  const MatD h = ((p.w_enc * inputs).colwise() + p.b_enc).array().tanh().matrix();
  const MatD recon = (p.w_enc.transpose() * h).colwise() + p.b_dec;
  const MatD resid = recon - targets;
  const double loss = 0.5 * resid.squaredNorm() / batch;
  if (g != nullptr) {
    const MatD d_recon = resid / batch;
    const MatD d_h = p.w_enc * d_recon;
    const MatD d_pre = d_h.array() * (1.0 - h.array().square());
    g->w = h * d_recon.transpose() + d_pre * inputs.transpose();
    g->b_enc = d_pre.rowwise().sum();
    g->b_dec = d_recon.rowwise().sum();
  }
  return loss;
}

}  // namespace

DaeParams dae_train(const MatD& clean, int hidden, double noise_sigma, int epochs, double lr,
                    std::uint64_t seed, int batch, std::vector<double>* epoch_loss) {
  const int dim = static_cast<int>(clean.rows());
  const int n = static_cast<int>(clean.cols());
  if (n == 0) throw std::invalid_argument("empty training set");
  if (!(lr > 0.0)) throw std::invalid_argument("non-positive learning rate");
  if (hidden < 1 || hidden >= dim)
    throw std::invalid_argument("hidden size must lie in [1, input dimension)");
  if (batch < 1) throw std::invalid_argument("batch size must be >= 1");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> init(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  DaeParams p;
  p.noise_sigma = noise_sigma;
  p.w_enc.resize(hidden, dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (int i = 0; i < hidden; ++i)
    for (int j = 0; j < dim; ++j) p.w_enc(i, j) = scale * init(rng);
  p.b_enc = VecD::Zero(hidden);
  p.b_dec = VecD::Zero(dim);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  if (epoch_loss != nullptr) epoch_loss->clear();
  DaeGrads g;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (int start = 0; start < n; start += batch) {
      const int b = std::min(batch, n - start);
      MatD targets(dim, b);
      for (int i = 0; i < b; ++i) targets.col(i) = clean.col(order[start + i]);
      MatD corrupted = targets;
      for (int i = 0; i < b; ++i)
        for (int j = 0; j < dim; ++j) corrupted(j, i) += noise_sigma * gauss(rng);

      loss_sum += dae_backward(p, corrupted, targets, &g);
      ++batches;
      p.w_enc -= lr * g.w;
      p.b_enc -= lr * g.b_enc;
      p.b_dec -= lr * g.b_dec;
    }
    if (epoch_loss != nullptr) epoch_loss->push_back(loss_sum / batches);
  }
  return p;
}

VecD dae_apply(const DaeParams& p, const VecD& x) {
  if (x.size() != p.input_dim()) throw std::invalid_argument("dimension mismatch");
  const VecD h = (p.w_enc * x + p.b_enc).array().tanh();
  return p.w_enc.transpose() * h + p.b_dec;
}

MatD dae_apply(const DaeParams& p, const MatD& columns) {
  if (columns.rows() != p.input_dim()) throw std::invalid_argument("dimension mismatch");
  const MatD h = ((p.w_enc * columns).colwise() + p.b_enc).array().tanh().matrix();
  return ((p.w_enc.transpose() * h).colwise() + p.b_dec);
}

double dae_loss(const DaeParams& p, const MatD& batch) {
  if (batch.rows() != p.input_dim()) throw std::invalid_argument("dimension mismatch");
  return dae_backward(p, batch, batch, nullptr);
}

double dae_grad_check(const DaeParams& p, const MatD& batch, double eps) {
  if (eps < 1e-7 || eps > 1e-3) throw std::invalid_argument("eps must lie in [1e-7, 1e-3]");
  if (batch.rows() != p.input_dim()) throw std::invalid_argument("dimension mismatch");

  DaeGrads g;
  dae_backward(p, batch, batch, &g);

  DaeParams probe = p;
  const auto numeric = [&](double* slot) {
    const double saved = *slot;
    *slot = saved + eps;
    const double up = dae_backward(probe, batch, batch, nullptr);
    *slot = saved - eps;
    const double down = dae_backward(probe, batch, batch, nullptr);
    *slot = saved;
    return (up - down) / (2.0 * eps);
  };

  const auto group_error = [&](double* data, Eigen::Index size, const double* analytic) {
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (Eigen::Index i = 0; i < size; ++i) {
      const double num = numeric(data + i);
      diff2 += (analytic[i] - num) * (analytic[i] - num);
      a2 += analytic[i] * analytic[i];
      n2 += num * num;
    }
    return std::sqrt(diff2) / (std::sqrt(a2) + std::sqrt(n2) + 1e-300);
  };

  double worst = group_error(probe.w_enc.data(), probe.w_enc.size(), g.w.data());
  worst = std::max(worst, group_error(probe.b_enc.data(), probe.b_enc.size(), g.b_enc.data()));
  worst = std::max(worst, group_error(probe.b_dec.data(), probe.b_dec.size(), g.b_dec.data()));
  return worst;
}

}  // namespace eegvid

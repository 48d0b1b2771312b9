// Acceptance gate: ten end-to-end checks, one [PASS]/[FAIL] line each (check 8 is
// informational and prints [SOFT]). Exit code is the number of hard failures.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "eegvid/eval.hpp"
#include "eegvid/flow.hpp"
#include "eegvid/imaging.hpp"
#include "test_util.hpp"

using namespace eegvid;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

// ---- 1: zero-phase Butterworth vs the analytic magnitude law ----

std::string check_filter_oracle() {
  const double rate = 1000.0;
  const int n = 4000;
  const BandpassSpec spec;

  const auto measure = [&](double freq) {
    const VecD out = butter_bandpass(spec, rate, testutil::tone(freq, rate, n));
    return testutil::tone_amplitude(out, freq, rate, 1000, 2000);
  };

  const double pass_measured = measure(10.0);
  const double pass_predicted = testutil::analytic_filtfilt_gain(10.0, 0.5, 50.0, rate, spec.order);
  require(std::abs(pass_measured / pass_predicted - 1.0) <= 0.02,
          fmt("10 Hz gain %.5f deviates from predicted %.5f by more than 2%%", pass_measured,
              pass_predicted));

  const double stop_measured = measure(100.0);
  const double stop_predicted = testutil::analytic_filtfilt_gain(100.0, 0.5, 50.0, rate, spec.order);
  const double measured_db = 20.0 * std::log10(stop_measured);
  const double predicted_db = 20.0 * std::log10(stop_predicted);
  require(std::abs(measured_db - predicted_db) <= 3.0,
          fmt("100 Hz attenuation %.2f dB vs predicted %.2f dB exceeds 3 dB", measured_db,
              predicted_db));

  return fmt("10 Hz gain %.5f (predicted %.5f), 100 Hz %.1f dB (predicted %.1f dB)",
             pass_measured, pass_predicted, measured_db, predicted_db);
}

// ---- 2: projection preserves angular distance from the vertex ----

std::string check_aep_equidistance() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ElectrodeLayout layout;
  while (layout.positions.size() < 1000) {
    Eigen::Vector3d v(gauss(rng), gauss(rng), gauss(rng));
    if (v.norm() < 1e-6) continue;
    layout.positions.push_back(v.normalized());
    layout.names.push_back("e" + std::to_string(layout.positions.size()));
  }

  const ProjectedLayout proj = aep_project(layout);
  double worst = 0.0;
  for (std::size_t i = 0; i < layout.positions.size(); ++i) {
    const double angular = std::acos(std::clamp(layout.positions[i].z(), -1.0, 1.0));
    worst = std::max(worst, std::abs(proj.points[i].norm() - angular));
  }
  require(worst <= 1e-9, fmt("max radius/angle mismatch %.3e exceeds 1e-9", worst));
  return fmt("max |planar radius - angular distance| = %.3e over 1000 vectors", worst);
}

// ---- 3: interpolation convexity, site reproduction, segment lengths ----

std::string check_rasterization() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uniform(-2.0, 2.0);

  const ProjectedLayout proj = aep_project(standard_layout_22());
  VecD values(22);
  for (int i = 0; i < 22; ++i) values(i) = uniform(rng);
  const Frame frame = rasterize(proj, values);
  const double lo = values.minCoeff(), hi = values.maxCoeff();
  require(frame.minCoeff() >= lo - 1e-12 && frame.maxCoeff() <= hi + 1e-12,
          fmt("pixel range [%.6f, %.6f] escapes electrode range [%.6f, %.6f]", frame.minCoeff(),
              frame.maxCoeff(), lo, hi));

  // Electrodes placed exactly at pixel centers must reproduce their values.
  ProjectedLayout manual;
  manual.square_min = {0.0, 0.0};
  manual.square_side = 32.0;
  manual.points = {manual.pixel_center(4, 7), manual.pixel_center(20, 25),
                   manual.pixel_center(31, 0), manual.pixel_center(0, 31)};
  const VecD site_values = (VecD(4) << 0.3, -1.7, 2.5, 0.9).finished();
  const Frame sites = rasterize(manual, site_values);
  require(sites(4, 7) == site_values(0) && sites(20, 25) == site_values(1) &&
              sites(31, 0) == site_values(2) && sites(0, 31) == site_values(3),
          "electrode-site pixels do not reproduce their values exactly");

  const std::array<int, 13> bounds = segment_bounds(2000);
  int total = 0;
  for (int s = 0; s < 12; ++s) {
    const int len = bounds[static_cast<std::size_t>(s) + 1] - bounds[static_cast<std::size_t>(s)];
    require(len == 166 || len == 167, fmt("segment %d has length %d", s, len));
    total += len;
  }
  require(total == 2000, fmt("segment lengths sum to %d", total));
  return "convex range held, 4/4 sites exact, 2000 samples -> lengths in {166,167}";
}

// ---- 4: optical-flow translation recovery ----

std::string check_flow() {
  constexpr int kMargin = 9;
  const auto interior_mean_error = [&](const FlowField& fl, double du, double dv) {
    double acc = 0.0;
    int count = 0;
    for (int r = kMargin; r < kFrameSize - kMargin; ++r)
      for (int c = kMargin; c < kFrameSize - kMargin; ++c) {
        acc += std::hypot(fl.u(r, c) - du, fl.v(r, c) - dv);
        ++count;
      }
    return acc / count;
  };

  std::string detail = "mean interior error";
  for (const double shift : {0.25, 0.5, 1.0}) {
    const Frame f1 = testutil::gaussian_blob(15.5, 15.5, 8.0);
    const Frame f2 = testutil::gaussian_blob(15.5 + shift, 15.5, 8.0);
    const FlowField fl = estimate_flow(f1, f2);
    const double err = interior_mean_error(fl, shift, 0.0);
    require(err <= 0.2, fmt("shift %.2f px recovered with mean error %.3f px", shift, err));
    detail += fmt(" %.3f@%.2fpx", err, shift);
  }

  const Frame f = testutil::gaussian_blob(14.0, 17.0, 6.0);
  const FlowField self = estimate_flow(f, f);
  require(self.u.isZero(0.0) && self.v.isZero(0.0), "flow of a frame against itself is not zero");

  // Brightness-constancy residual of the recovered field.
  const Frame f1 = testutil::gaussian_blob(15.5, 15.5, 8.0);
  const Frame f2 = testutil::gaussian_blob(16.0, 15.5, 8.0);
  const FlowField fl = estimate_flow(f1, f2);
  std::vector<double> residuals, dts;
  for (int r = kMargin; r < kFrameSize - kMargin; ++r)
    for (int c = kMargin; c < kFrameSize - kMargin; ++c) {
      const auto mean = [&](int rr, int cc) { return 0.5 * (f1(rr, cc) + f2(rr, cc)); };
      const double fx = 0.5 * (mean(r, c + 1) - mean(r, c - 1));
      const double fy = 0.5 * (mean(r + 1, c) - mean(r - 1, c));
      const double ft = f2(r, c) - f1(r, c);
      residuals.push_back(std::abs(fx * fl.u(r, c) + fy * fl.v(r, c) + ft));
      dts.push_back(std::abs(ft));
    }
  const auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
    return v[v.size() / 2];
  };
  const double med_residual = median(residuals), med_dt = median(dts);
  require(med_residual <= 0.1 * med_dt,
          fmt("median residual %.3e exceeds 10%% of median |ft| %.3e", med_residual, med_dt));
  detail += fmt(", identity exact, residual %.2e <= 0.1 x %.2e", med_residual, med_dt);
  return detail;
}

// ---- 5: gradient checks per layer and end to end ----

std::string check_gradients() {
  std::mt19937_64 rng(55);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto fill = [&](auto& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = gauss(rng);
  };
  double worst = 0.0;
  const auto track = [&](double err, const char* what) {
    worst = std::max(worst, err);
    require(err <= 1e-4, fmt("%s gradient error %.3e exceeds 1e-4", what, err));
  };
  const double eps = 1e-6;

  {  // conv + pool: weighted-sum loss through the pair
    ConvLayer<double> layer;
    layer.w.resize(3, 2 * kConvKernel * kConvKernel);
    layer.b.resize(3);
    fill(layer.w);
    fill(layer.b);
    Mat<double> x(2, 100);  // one 10x10 two-channel image
    fill(x);
    Mat<double> r_conv(3, 49), r_pool(3, 2 * 9);  // conv out 7x7, pooled 3x3 per two samples
    fill(r_conv);

    auto conv_loss = [&] {
      return r_conv.cwiseProduct(conv_forward(layer, x, 1, 10, 10)).sum();
    };
    ConvCache<double> cache;
    conv_forward(layer, x, 1, 10, 10, &cache);
    Mat<double> dw = Mat<double>::Zero(3, 32);
    Vec<double> db = Vec<double>::Zero(3);
    const Mat<double> dx = conv_backward(layer, cache, r_conv, dw, db);
    track(detail::span_fd_error(layer.w.data(), dw.data(), layer.w.size(), eps, conv_loss),
          "conv w");
    track(detail::span_fd_error(layer.b.data(), db.data(), layer.b.size(), eps, conv_loss),
          "conv b");
    track(detail::span_fd_error(x.data(), dx.data(), x.size(), eps, conv_loss), "conv x");

    Mat<double> px(3, 2 * 49);  // two 7x7 three-channel samples
    fill(px);
    fill(r_pool);
    auto pool_loss = [&] { return r_pool.cwiseProduct(pool_forward(px, 2, 7, 7)).sum(); };
    PoolCache<double> pcache;
    pool_forward(px, 2, 7, 7, &pcache);
    const Mat<double> pdx = pool_backward(pcache, r_pool);
    track(detail::span_fd_error(px.data(), pdx.data(), px.size(), eps, pool_loss), "pool x");
  }

  {  // dense
    DenseLayer<double> layer;
    layer.w.resize(4, 6);
    layer.b.resize(4);
    fill(layer.w);
    fill(layer.b);
    Mat<double> x(6, 3), r(4, 3);
    fill(x);
    fill(r);
    auto loss = [&] { return r.cwiseProduct(dense_forward(layer, x)).sum(); };
    Mat<double> dw = Mat<double>::Zero(4, 6);
    Vec<double> db = Vec<double>::Zero(4);
    dense_backward(layer, x, r, dw, db);
    track(detail::span_fd_error(layer.w.data(), dw.data(), layer.w.size(), eps, loss), "dense w");
    track(detail::span_fd_error(layer.b.data(), db.data(), layer.b.size(), eps, loss), "dense b");
  }

  {  // softmax + cross-entropy
    Mat<double> logits(5, 4);
    fill(logits);
    const std::vector<int> labels = {2, 0, 4, 1};
    Mat<double> dlogits;
    cross_entropy(softmax(logits), labels, &dlogits);
    auto loss = [&] { return cross_entropy(softmax(logits), labels); };
    track(detail::span_fd_error(logits.data(), dlogits.data(), logits.size(), eps, loss),
          "softmax-ce");
  }

  for (const RnnCell cell : {RnnCell::lstm, RnnCell::gru}) {  // recurrent cells over 2 steps
    RnnLayer<double> p = init_rnn_layer<double>(cell, 3, 4, rng);
    std::vector<Mat<double>> inputs(2, Mat<double>(3, 2)), dh_ext(2, Mat<double>(4, 2));
    for (auto& m : inputs) fill(m);
    for (auto& m : dh_ext) fill(m);
    auto loss = [&] {
      std::vector<Mat<double>> h;
      rnn_layer_forward<double>(cell, p, inputs, 2, nullptr, h);
      return dh_ext[0].cwiseProduct(h[0]).sum() + dh_ext[1].cwiseProduct(h[1]).sum();
    };
    RnnLayerTrace<double> trace;
    std::vector<Mat<double>> h;
    rnn_layer_forward(cell, p, inputs, 2, &trace, h);
    Mat<double> dwx = Mat<double>::Zero(p.wx.rows(), p.wx.cols());
    Mat<double> dwh = Mat<double>::Zero(p.wh.rows(), p.wh.cols());
    Vec<double> db = Vec<double>::Zero(p.b.size());
    rnn_layer_backward(cell, p, trace, dh_ext, dwx, dwh, db);
    const char* tag = cell == RnnCell::lstm ? "lstm" : "gru";
    track(detail::span_fd_error(p.wx.data(), dwx.data(), p.wx.size(), eps, loss),
          (std::string(tag) + " wx").c_str());
    track(detail::span_fd_error(p.wh.data(), dwh.data(), p.wh.size(), eps, loss),
          (std::string(tag) + " wh").c_str());
    track(detail::span_fd_error(p.b.data(), db.data(), p.b.size(), eps, loss),
          (std::string(tag) + " b").c_str());
  }

  for (const RnnCell cell : {RnnCell::lstm, RnnCell::gru}) {  // end to end
    NetConfig cfg;
    cfg.cell = cell;
    cfg.in_channels = 2;
    cfg.n_classes = 3;
    cfg.image = 20;
    cfg.conv1_filters = 3;
    cfg.conv2_filters = 4;
    cfg.rnn_units = 6;
    cfg.dense_units = 5;
    cfg.seed = 17;
    NetParamsT<double> p = init_params<double>(cfg);
    std::vector<SequenceT<double>> batch(2);
    for (int i = 0; i < 2; ++i) {
      batch[static_cast<std::size_t>(i)].label = i == 0 ? 0 : 2;
      for (int t = 0; t < kSeqLen; ++t) {
        Mat<double> step(cfg.in_channels, cfg.image * cfg.image);
        fill(step);
        batch[static_cast<std::size_t>(i)].steps.push_back(0.5 * step);
      }
    }
    const double err = grad_check(p, batch, 1e-6);
    track(err, cell == RnnCell::lstm ? "end-to-end lstm" : "end-to-end gru");
  }

  return fmt("max normalized gradient error %.3e across all groups", worst);
}

// ---- 6: two-step training contract ----

std::vector<TrainSample> tiny_separable(int per_class) {
  std::mt19937_64 rng(100);
  std::normal_distribution<float> noise(0.0f, 0.1f);
  std::vector<TrainSample> data;
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < per_class; ++i) {
      TrainSample sample;
      sample.seq.label = k;
      const float level = k == 0 ? 0.6f : -0.6f;
      const auto image = [&] {
        MatF img = MatF::Constant(1, 18 * 18, level);
        for (Eigen::Index j = 0; j < img.size(); ++j) img(0, j) += noise(rng);
        return img;
      };
      for (int t = 0; t < kSeqLen; ++t) sample.seq.steps.push_back(image());
      for (int t = 0; t < 3; ++t) sample.frames.push_back(image());
      data.push_back(std::move(sample));
    }
  return data;
}

std::string check_two_step_contract() {
  const std::vector<TrainSample> data = tiny_separable(6);
  NetConfig cfg;
  cfg.cell = RnnCell::lstm;
  cfg.in_channels = 1;
  cfg.n_classes = 2;
  cfg.image = 18;
  cfg.conv1_filters = 4;
  cfg.conv2_filters = 8;
  cfg.rnn_units = 8;
  cfg.dense_units = 8;
  cfg.seed = 11;
  cfg.lr = 0.05;
  cfg.epochs_cnn = 2;
  cfg.epochs_rnn = 6;
  cfg.batch = 4;

  const NetParams full = train_two_step(data, cfg);
  NetConfig cnn_only = cfg;
  cnn_only.epochs_rnn = 0;
  const NetParams frozen = train_two_step(data, cnn_only);
  require(full.conv1.w == frozen.conv1.w && full.conv1.b == frozen.conv1.b &&
              full.conv2.w == frozen.conv2.w && full.conv2.b == frozen.conv2.b,
          "conv parameters changed during the recurrent training step");

  const NetParams again = train_two_step(data, cfg);
  testutil::TempDir dir;
  save_checkpoint(full, dir.file("a.ckpt"));
  save_checkpoint(again, dir.file("b.ckpt"));
  require(testutil::read_file(dir.file("a.ckpt")) == testutil::read_file(dir.file("b.ckpt")),
          "same seed produced different checkpoint bytes");
  return "conv stack bitwise-frozen in step 2; repeated runs byte-identical";
}

// ---- 7: desk-scale end-to-end classification with a separability oracle ----

// Per-trial log band power via a direct DFT, classified with multinomial logistic
// regression: an oracle independent of the pipeline under test.
MatD band_power_features(const Recording& rec) {
  const int n = rec.n_samples();
  const double rate = rec.sample_rate;
  const int channels = rec.n_channels();
  MatD feats(5 * channels, static_cast<Eigen::Index>(rec.trials.size()));

  for (std::size_t tr = 0; tr < rec.trials.size(); ++tr) {
    const MatD x = rec.trials[tr].samples.cast<double>();
    int row = 0;
    for (const RhythmBand& band : rhythm_bands()) {
      const int k_lo = static_cast<int>(std::ceil(band.low_hz * n / rate));
      const int k_hi = static_cast<int>(std::floor(band.high_hz * n / rate));
      for (int ch = 0; ch < channels; ++ch) {
        double power = 0.0;
        for (int k = std::max(1, k_lo); k <= k_hi; ++k) {
          double re = 0.0, im = 0.0;
          for (int t = 0; t < n; ++t) {
            const double w = 2.0 * std::numbers::pi * k * t / n;
            re += x(ch, t) * std::cos(w);
            im -= x(ch, t) * std::sin(w);
          }
          power += re * re + im * im;
        }
        feats(row++, static_cast<Eigen::Index>(tr)) = std::log(power + 1e-30);
      }
    }
  }
  return feats;
}

double logistic_cv_accuracy(const MatD& feats, const std::vector<int>& labels, int n_classes,
                            int k) {
  const int n = static_cast<int>(labels.size());
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  std::vector<int> rank(static_cast<std::size_t>(n_classes), 0);
  for (int i = 0; i < n; ++i)
    fold_of[static_cast<std::size_t>(i)] = rank[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])]++ % k;

  int hits = 0;
  for (int fold = 0; fold < k; ++fold) {
    std::vector<int> train, test;
    for (int i = 0; i < n; ++i)
      (fold_of[static_cast<std::size_t>(i)] == fold ? test : train).push_back(i);

    VecD mean = VecD::Zero(feats.rows()), scale = VecD::Zero(feats.rows());
    for (int i : train) mean += feats.col(i);
    mean /= static_cast<double>(train.size());
    for (int i : train) scale += (feats.col(i) - mean).cwiseAbs2();
    scale = (scale / static_cast<double>(train.size())).cwiseSqrt().cwiseMax(1e-12);

    MatD x(feats.rows(), static_cast<Eigen::Index>(train.size()));
    MatD y = MatD::Zero(n_classes, static_cast<Eigen::Index>(train.size()));
    for (std::size_t j = 0; j < train.size(); ++j) {
      x.col(static_cast<Eigen::Index>(j)) =
          (feats.col(train[j]) - mean).cwiseQuotient(scale);
      y(labels[static_cast<std::size_t>(train[j])], static_cast<Eigen::Index>(j)) = 1.0;
    }

    MatD w = MatD::Zero(n_classes, feats.rows());
    VecD b = VecD::Zero(n_classes);
    const double lr = 0.5, l2 = 1e-3;
    for (int iter = 0; iter < 400; ++iter) {
      MatD logits = w * x;
      logits.colwise() += b;
      MatD probs(logits.rows(), logits.cols());
      for (Eigen::Index c = 0; c < logits.cols(); ++c) {
        const VecD e = (logits.col(c).array() - logits.col(c).maxCoeff()).exp();
        probs.col(c) = e / e.sum();
      }
      const MatD g = (probs - y) / static_cast<double>(train.size());
      w -= lr * (g * x.transpose() + l2 * w);
      b -= lr * g.rowwise().sum();
    }

    for (int i : test) {
      const VecD z = w * (feats.col(i) - mean).cwiseQuotient(scale) + b;
      Eigen::Index best = 0;
      z.maxCoeff(&best);
      if (static_cast<int>(best) == labels[static_cast<std::size_t>(i)]) ++hits;
    }
  }
  return 100.0 * hits / static_cast<double>(n);
}

struct DeskScale {
  PipelineConfig pcfg;
  NetConfig ncfg;
  int jobs;
};

DeskScale desk_scale_config() {
  DeskScale d;
  d.pcfg.dae_epochs = 10;
  d.pcfg.cnn_frame_stride = 16;
  d.ncfg.conv1_filters = 8;
  d.ncfg.conv2_filters = 16;
  d.ncfg.rnn_units = 64;
  d.ncfg.dense_units = 32;
  d.ncfg.epochs_cnn = 4;
  d.ncfg.epochs_rnn = 30;
  d.ncfg.batch = 16;
  d.jobs = static_cast<int>(std::min(5u, std::max(1u, std::thread::hardware_concurrency())));
  return d;
}

std::string check_desk_scale() {
  // Segment averaging attenuates the class oscillations roughly tenfold, so the
  // synthetic signal level is chosen to survive the compression with margin.
  SynthOptions opt;
  opt.amplitude = 3.0;
  opt.noise_sigma = 0.2;
  const Recording rec = synth_recording(1, 4, 20, standard_layout_22(), 250.0, 2.0, opt);
  std::vector<int> labels;
  for (const Trial& t : rec.trials) labels.push_back(t.label);

  const double oracle = logistic_cv_accuracy(band_power_features(rec), labels, 4, 5);
  require(oracle >= 90.0,
          fmt("band-power oracle reaches only %.1f%%: dataset not separable enough for the "
              "thresholds to bind",
              oracle));

  const DeskScale d = desk_scale_config();
  const double lstm = cross_validate(rec, Method::cnn_rnn_lstm, 5, 1, d.pcfg, d.ncfg, d.jobs).mean;
  require(lstm >= 90.0, fmt("oracle %.1f%% but lstm pipeline only %.1f%% (threshold 90%%)",
                            oracle, lstm));
  const double gru = cross_validate(rec, Method::cnn_rnn_gru, 5, 1, d.pcfg, d.ncfg, d.jobs).mean;
  require(gru >= 90.0,
          fmt("oracle %.1f%% but gru pipeline only %.1f%% (threshold 90%%)", oracle, gru));
  const double csp = cross_validate(rec, Method::csp_lda, 5, 1, d.pcfg, d.ncfg, d.jobs).mean;
  require(csp >= 85.0,
          fmt("oracle %.1f%% but csp-lda only %.1f%% (threshold 85%%)", oracle, csp));

  return fmt("oracle %.1f%%, lstm %.1f%%, gru %.1f%%, csp-lda %.1f%% (5-fold, 80 trials)", oracle,
             lstm, gru, csp);
}

// ---- 8 (soft): ordering on a noisier variant, logged only ----

std::string check_relative_ordering() {
  SynthOptions opt;
  opt.amplitude = 3.0;
  opt.noise_sigma = 1.0;
  const Recording rec = synth_recording(7, 4, 20, standard_layout_22(), 250.0, 2.0, opt);

  const DeskScale d = desk_scale_config();
  const double lstm = cross_validate(rec, Method::cnn_rnn_lstm, 5, 7, d.pcfg, d.ncfg, d.jobs).mean;
  const double csp = cross_validate(rec, Method::csp_lda, 5, 7, d.pcfg, d.ncfg, d.jobs).mean;
  return fmt("noisy variant: cnn-rnn-lstm %.1f%% vs csp-lda %.1f%% -> ordering %s", lstm, csp,
             lstm >= csp ? "held" : "NOT held");
}

// ---- 9: report arithmetic fixture ----

std::string check_table_fixture() {
  Recording rec = synth_recording(3, 2, 9, standard_layout_22(), 128.0, 0.5);
  rec.trials.resize(9);
  for (Trial& t : rec.trials) t.label = 0;
  const FoldPlan plan = make_folds(std::vector<int>(9, 0), 9, 1);

  const auto row = [&](const std::vector<double>& values, const std::string& name) {
    const FoldRunner runner = [&values](const Recording&, const std::vector<int>&,
                                        const std::vector<int>&, int fold) {
      return values[static_cast<std::size_t>(fold)];
    };
    return cross_validate_with(rec, plan, runner, name, 1);
  };

  const std::vector<EvalReport> reports = {
      row({78.8, 62.5, 83.0, 63.5, 67.7, 45.8, 90.3, 85.8, 72.6}, "cnn-rnn-lstm"),
      row({78.1, 44.4, 81.9, 59.0, 39.6, 50.0, 80.9, 68.4, 77.1}, "csp-lda"),
  };
  const std::string table = format_table(reports);
  require(table.find("72.22") != std::string::npos && table.find("13.17") != std::string::npos,
          "nine-fold summary row did not land on Avg 72.22 / Std 13.17:\n" + table);
  require(table.find("64.38") != std::string::npos && table.find("15.62") != std::string::npos,
          "nine-fold summary row did not land on Avg 64.38 / Std 15.62:\n" + table);
  return "nine accuracies -> Avg 72.22 Std 13.17 (and 64.38/15.62) reproduced";
}

// ---- 10: denoiser recovers a low-dimensional subspace ----

std::string check_dae_subspace() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatD basis_seed(22, 2);
  for (Eigen::Index r = 0; r < 22; ++r)
    for (Eigen::Index c = 0; c < 2; ++c) basis_seed(r, c) = gauss(rng);
  const MatD q = Eigen::HouseholderQR<MatD>(basis_seed).householderQ() * MatD::Identity(22, 2);

  const int n = 600;
  MatD coeffs(2, n);
  for (int i = 0; i < n; ++i) {
    coeffs(0, i) = 0.9 * gauss(rng);
    coeffs(1, i) = 0.5 * gauss(rng);
  }
  const MatD clean = q * coeffs;

  const double channel_std = std::sqrt(clean.array().square().mean());
  const DaeParams dae = dae_train(clean, 4, 0.1 * channel_std, 400, 0.05, 5);
  const MatD recon = dae_apply(dae, clean);

  const double mse = (recon - clean).array().square().mean();
  const double variance = (clean.array() - clean.mean()).square().mean();
  require(mse <= 0.10 * variance,
          fmt("reconstruction MSE %.5f exceeds 10%% of input variance %.5f", mse, variance));
  return fmt("MSE %.5f vs input variance %.5f (%.1f%%)", mse, variance, 100.0 * mse / variance);
}

// ---- harness ----

struct Check {
  int id;
  const char* title;
  double budget_s;
  bool soft;
  std::function<std::string()> fn;
};

}  // namespace

int main() {
  const std::vector<Check> checks = {
      {1, "filter gain oracle", 1.0, false, check_filter_oracle},
      {2, "projection equidistance", 1.0, false, check_aep_equidistance},
      {3, "interpolation and segmentation", 1.0, false, check_rasterization},
      {4, "optical-flow translation recovery", 5.0, false, check_flow},
      {5, "gradient checks", 60.0, false, check_gradients},
      {6, "two-step training contract", 0.0, false, check_two_step_contract},
      {7, "desk-scale classification", 600.0, false, check_desk_scale},
      {8, "relative ordering (informational)", 0.0, true, check_relative_ordering},
      {9, "report table fixture", 0.0, false, check_table_fixture},
      {10, "denoiser subspace recovery", 30.0, false, check_dae_subspace},
  };

  int failures = 0;
  for (const Check& check : checks) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
      detail = check.fn();
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (ok && check.budget_s > 0.0 && elapsed > check.budget_s) {
      ok = false;
      detail += fmt(" [exceeded %.0f s budget]", check.budget_s);
    }
    const char* tag = check.soft ? "[SOFT]" : (ok ? "[PASS]" : "[FAIL]");
    std::printf("%s %2d %s: %s (%.2f s)\n", tag, check.id, check.title, detail.c_str(), elapsed);
    if (!ok && !check.soft) ++failures;
  }
  if (failures > 0) std::printf("%d of 10 checks failed\n", failures);
  return failures;
}

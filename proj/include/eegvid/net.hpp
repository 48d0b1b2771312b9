#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "eegvid/types.hpp"

namespace eegvid {

enum class RnnCell { lstm, gru };

std::string cell_name(RnnCell cell);
RnnCell cell_from_name(const std::string& name);

// Kernel sizes are architectural constants: 4x4 convolutions (valid padding) and
// 3x3 max pooling with stride 2.
inline constexpr int kConvKernel = 4;
inline constexpr int kPoolKernel = 3;
inline constexpr int kPoolStride = 2;
inline constexpr int kSeqLen = 12;

struct NetConfig {
  RnnCell cell = RnnCell::lstm;
  int in_channels = 7;  // 5 band frames + flow magnitude + flow direction
  int n_classes = 4;
  int image = kFrameSize;
  int conv1_filters = 16;
  int conv2_filters = 32;
  int rnn_units = 128;
  int dense_units = 64;
  std::uint64_t seed = 0;
  double lr = 0.02;
  int epochs_cnn = 6;
  int epochs_rnn = 30;
  int batch = 32;
  double momentum = 0.9;
  double clip_norm = 5.0;
};

struct ConvShapes {
  int image, c1, p1, c2, p2;
  int feat_dim;
};

inline ConvShapes net_shapes(const NetConfig& cfg) {
  auto conv_out = [](int in) { return in - kConvKernel + 1; };
  auto pool_out = [](int in) { return (in - kPoolKernel) / kPoolStride + 1; };
  ConvShapes s{};
  s.image = cfg.image;
  s.c1 = conv_out(s.image);
  s.p1 = s.c1 >= kPoolKernel ? pool_out(s.c1) : 0;
  s.c2 = conv_out(s.p1);
  s.p2 = s.c2 >= kPoolKernel ? pool_out(s.c2) : 0;
  if (s.c1 < 1 || s.p1 < 1 || s.c2 < 1 || s.p2 < 1)
    throw std::invalid_argument("image too small for the conv stack");
  s.feat_dim = cfg.conv2_filters * s.p2 * s.p2;
  return s;
}

inline int gates_per_cell(RnnCell cell) { return cell == RnnCell::lstm ? 4 : 3; }

template <class Scalar>
struct ConvLayer {
  Mat<Scalar> w;  // filters x (in_channels * kConvKernel^2)
  Vec<Scalar> b;
};

template <class Scalar>
struct RnnLayer {
  Mat<Scalar> wx;  // gates*units x input_dim
  Mat<Scalar> wh;  // gates*units x units
  Vec<Scalar> b;   // gates*units
};

template <class Scalar>
struct DenseLayer {
  Mat<Scalar> w;  // out x in
  Vec<Scalar> b;
};

template <class Scalar>
struct NetParamsT {
  NetConfig cfg;
  ConvLayer<Scalar> conv1, conv2;
  RnnLayer<Scalar> rnn1, rnn2;
  DenseLayer<Scalar> dense;  // ReLU
  DenseLayer<Scalar> head;   // softmax
};
using NetParams = NetParamsT<float>;

// One time step of network input: in_channels x (image * image), spatial row-major.
template <class Scalar>
using ImageT = Mat<Scalar>;

// Fixed channel order: alpha, beta, gamma, delta, theta, flow magnitude, flow direction.
template <class Scalar>
struct SequenceT {
  std::vector<ImageT<Scalar>> steps;  // exactly kSeqLen
  int label = -1;
};
using Sequence = SequenceT<float>;

template <class Scalar>
struct TrainSampleT {
  SequenceT<Scalar> seq;
  std::vector<ImageT<Scalar>> frames;  // fully-sampled per-frame tensors, same layout
};
using TrainSample = TrainSampleT<float>;

struct TrainLog {
  std::vector<double> cnn_loss, cnn_acc;  // per step-1 epoch (mean over minibatches)
  std::vector<double> rnn_loss, rnn_acc;  // per step-2 epoch
};

template <class Scalar>
struct NetGradsT {
  Mat<Scalar> conv1_w, conv2_w, rnn1_wx, rnn1_wh, rnn2_wx, rnn2_wh, dense_w, head_w;
  Vec<Scalar> conv1_b, conv2_b, rnn1_b, rnn2_b, dense_b, head_b;
};

namespace detail {

template <class Scalar>
void init_uniform(Mat<Scalar>& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<Scalar>(dist(rng));
}

template <class Scalar>
void init_uniform(Vec<Scalar>& v, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = static_cast<Scalar>(dist(rng));
}

template <class Scalar>
Mat<Scalar> sigmoid(const Mat<Scalar>& x) {
  return ((-x.array()).exp() + Scalar(1)).inverse().matrix();
}

}  // namespace detail

template <class Scalar>
RnnLayer<Scalar> init_rnn_layer(RnnCell cell, int input_dim, int units, std::mt19937_64& rng) {
  RnnLayer<Scalar> layer;
  const int rows = gates_per_cell(cell) * units;
  layer.wx.resize(rows, input_dim);
  layer.wh.resize(rows, units);
  layer.b = Vec<Scalar>::Zero(rows);
  detail::init_uniform(layer.wx, 1.0 / std::sqrt(double(input_dim)), rng);
  detail::init_uniform(layer.wh, 1.0 / std::sqrt(double(units)), rng);
  if (cell == RnnCell::lstm) layer.b.segment(units, units).setConstant(Scalar(1));  // forget gate
  return layer;
}

template <class Scalar>
NetParamsT<Scalar> init_params(const NetConfig& cfg, std::mt19937_64& rng) {
  const ConvShapes s = net_shapes(cfg);
  NetParamsT<Scalar> p;
  p.cfg = cfg;

  const int k2 = kConvKernel * kConvKernel;
  p.conv1.w.resize(cfg.conv1_filters, cfg.in_channels * k2);
  p.conv1.b = Vec<Scalar>::Zero(cfg.conv1_filters);
  detail::init_uniform(p.conv1.w, 1.0 / std::sqrt(double(cfg.in_channels * k2)), rng);

  p.conv2.w.resize(cfg.conv2_filters, cfg.conv1_filters * k2);
  p.conv2.b = Vec<Scalar>::Zero(cfg.conv2_filters);
  detail::init_uniform(p.conv2.w, 1.0 / std::sqrt(double(cfg.conv1_filters * k2)), rng);

  p.rnn1 = init_rnn_layer<Scalar>(cfg.cell, s.feat_dim, cfg.rnn_units, rng);
  p.rnn2 = init_rnn_layer<Scalar>(cfg.cell, cfg.rnn_units, cfg.rnn_units, rng);

  p.dense.w.resize(cfg.dense_units, cfg.rnn_units);
  p.dense.b = Vec<Scalar>::Zero(cfg.dense_units);
  detail::init_uniform(p.dense.w, 1.0 / std::sqrt(double(cfg.rnn_units)), rng);

  p.head.w.resize(cfg.n_classes, cfg.dense_units);
  p.head.b = Vec<Scalar>::Zero(cfg.n_classes);
  detail::init_uniform(p.head.w, 1.0 / std::sqrt(double(cfg.dense_units)), rng);
  return p;
}

template <class Scalar>
NetParamsT<Scalar> init_params(const NetConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  return init_params<Scalar>(cfg, rng);
}

// ---- convolution / pooling on batched images ----
// A batch is a single matrix: channels x (batch * H * W); sample b's pixel (r,c) of
// channel ch sits at (ch, b*H*W + r*W + c).

template <class Scalar>
struct ConvCache {
  Mat<Scalar> patches;  // (C*k^2) x (B*oH*oW)
  int batch = 0, in_h = 0, in_w = 0, out_h = 0, out_w = 0, in_channels = 0;
};

template <class Scalar>
Mat<Scalar> im2col(const Mat<Scalar>& x, int batch, int h, int w) {
  const int channels = static_cast<int>(x.rows());
  const int oh = h - kConvKernel + 1;
  const int ow = w - kConvKernel + 1;
  Mat<Scalar> patches(channels * kConvKernel * kConvKernel,
                      static_cast<Eigen::Index>(batch) * oh * ow);
  for (int b = 0; b < batch; ++b) {
    const Eigen::Index base_in = static_cast<Eigen::Index>(b) * h * w;
    const Eigen::Index base_out = static_cast<Eigen::Index>(b) * oh * ow;
    for (int orow = 0; orow < oh; ++orow) {
      for (int ocol = 0; ocol < ow; ++ocol) {
        const Eigen::Index j = base_out + static_cast<Eigen::Index>(orow) * ow + ocol;
        for (int c = 0; c < channels; ++c) {
          for (int ky = 0; ky < kConvKernel; ++ky) {
            for (int kx = 0; kx < kConvKernel; ++kx) {
              patches((c * kConvKernel + ky) * kConvKernel + kx, j) =
                  x(c, base_in + static_cast<Eigen::Index>(orow + ky) * w + (ocol + kx));
            }
          }
        }
      }
    }
  }
  return patches;
}

template <class Scalar>
Mat<Scalar> conv_forward(const ConvLayer<Scalar>& layer, const Mat<Scalar>& x, int batch, int h,
                         int w, ConvCache<Scalar>* cache = nullptr) {
  if (layer.w.cols() != x.rows() * kConvKernel * kConvKernel)
    throw std::invalid_argument("conv input channel mismatch");
  Mat<Scalar> patches = im2col(x, batch, h, w);
  Mat<Scalar> out = layer.w * patches;
  out.colwise() += layer.b;
  if (cache) {
    cache->patches = std::move(patches);
    cache->batch = batch;
    cache->in_h = h;
    cache->in_w = w;
    cache->out_h = h - kConvKernel + 1;
    cache->out_w = w - kConvKernel + 1;
    cache->in_channels = static_cast<int>(x.rows());
  }
  return out;
}

// Returns d(input); accumulates parameter gradients into dw/db.
template <class Scalar>
Mat<Scalar> conv_backward(const ConvLayer<Scalar>& layer, const ConvCache<Scalar>& cache,
                          const Mat<Scalar>& dout, Mat<Scalar>& dw, Vec<Scalar>& db,
                          bool need_dx = true) {
  dw.noalias() += dout * cache.patches.transpose();
  db.noalias() += dout.rowwise().sum();
  if (!need_dx) return Mat<Scalar>();

  const Mat<Scalar> dpatches = layer.w.transpose() * dout;
  Mat<Scalar> dx = Mat<Scalar>::Zero(cache.in_channels,
                                     static_cast<Eigen::Index>(cache.batch) * cache.in_h * cache.in_w);
  for (int b = 0; b < cache.batch; ++b) {
    const Eigen::Index base_in = static_cast<Eigen::Index>(b) * cache.in_h * cache.in_w;
    const Eigen::Index base_out = static_cast<Eigen::Index>(b) * cache.out_h * cache.out_w;
    for (int orow = 0; orow < cache.out_h; ++orow) {
      for (int ocol = 0; ocol < cache.out_w; ++ocol) {
        const Eigen::Index j = base_out + static_cast<Eigen::Index>(orow) * cache.out_w + ocol;
        for (int c = 0; c < cache.in_channels; ++c) {
          for (int ky = 0; ky < kConvKernel; ++ky) {
            for (int kx = 0; kx < kConvKernel; ++kx) {
              dx(c, base_in + static_cast<Eigen::Index>(orow + ky) * cache.in_w + (ocol + kx)) +=
                  dpatches((c * kConvKernel + ky) * kConvKernel + kx, j);
            }
          }
        }
      }
    }
  }
  return dx;
}

template <class Scalar>
struct PoolCache {
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> argmax;  // winner input column
  int batch = 0, in_h = 0, in_w = 0, out_h = 0, out_w = 0;
};

template <class Scalar>
Mat<Scalar> pool_forward(const Mat<Scalar>& x, int batch, int h, int w,
                         PoolCache<Scalar>* cache = nullptr) {
  const int channels = static_cast<int>(x.rows());
  const int oh = (h - kPoolKernel) / kPoolStride + 1;
  const int ow = (w - kPoolKernel) / kPoolStride + 1;
  Mat<Scalar> out(channels, static_cast<Eigen::Index>(batch) * oh * ow);
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> argmax(channels, out.cols());
  for (int b = 0; b < batch; ++b) {
    const Eigen::Index base_in = static_cast<Eigen::Index>(b) * h * w;
    const Eigen::Index base_out = static_cast<Eigen::Index>(b) * oh * ow;
    for (int orow = 0; orow < oh; ++orow) {
      for (int ocol = 0; ocol < ow; ++ocol) {
        const Eigen::Index j = base_out + static_cast<Eigen::Index>(orow) * ow + ocol;
        for (int c = 0; c < channels; ++c) {
          Scalar best{};
          Eigen::Index best_at = -1;
          // Row-major scan; ties keep the first maximum.
          for (int ky = 0; ky < kPoolKernel; ++ky) {
            for (int kx = 0; kx < kPoolKernel; ++kx) {
              const Eigen::Index at =
                  base_in + static_cast<Eigen::Index>(orow * kPoolStride + ky) * w +
                  (ocol * kPoolStride + kx);
              if (best_at < 0 || x(c, at) > best) {
                best = x(c, at);
                best_at = at;
              }
            }
          }
          out(c, j) = best;
          argmax(c, j) = best_at;
        }
      }
    }
  }
  if (cache) {
    cache->argmax = std::move(argmax);
    cache->batch = batch;
    cache->in_h = h;
    cache->in_w = w;
    cache->out_h = oh;
    cache->out_w = ow;
  }
  return out;
}

template <class Scalar>
Mat<Scalar> pool_backward(const PoolCache<Scalar>& cache, const Mat<Scalar>& dout) {
  Mat<Scalar> dx = Mat<Scalar>::Zero(dout.rows(),
                                     static_cast<Eigen::Index>(cache.batch) * cache.in_h * cache.in_w);
  for (Eigen::Index c = 0; c < dout.rows(); ++c)
    for (Eigen::Index j = 0; j < dout.cols(); ++j) dx(c, cache.argmax(c, j)) += dout(c, j);
  return dx;
}

// ---- CNN ----

template <class Scalar>
struct CnnCache {
  ConvCache<Scalar> conv1, conv2;
  PoolCache<Scalar> pool1, pool2;
  Mat<Scalar> relu1, relu2;  // post-activation values (mask via > 0)
};

// Features for a batch of images packed channels x (B * image^2); output feat_dim x B,
// flattened channel-major then spatial row-major.
template <class Scalar>
Mat<Scalar> cnn_forward_batch(const NetParamsT<Scalar>& p, const Mat<Scalar>& x, int batch,
                              CnnCache<Scalar>* cache = nullptr) {
  const ConvShapes s = net_shapes(p.cfg);
  if (x.rows() != p.cfg.in_channels ||
      x.cols() != static_cast<Eigen::Index>(batch) * s.image * s.image)
    throw std::invalid_argument("input tensor shape mismatch");

  Mat<Scalar> a1 = conv_forward(p.conv1, x, batch, s.image, s.image,
                                cache ? &cache->conv1 : nullptr);
  a1 = a1.cwiseMax(Scalar(0));
  Mat<Scalar> z1 = pool_forward(a1, batch, s.c1, s.c1, cache ? &cache->pool1 : nullptr);

  Mat<Scalar> a2 = conv_forward(p.conv2, z1, batch, s.p1, s.p1, cache ? &cache->conv2 : nullptr);
  a2 = a2.cwiseMax(Scalar(0));
  Mat<Scalar> z2 = pool_forward(a2, batch, s.c2, s.c2, cache ? &cache->pool2 : nullptr);
  if (cache) {
    cache->relu1 = std::move(a1);
    cache->relu2 = std::move(a2);
  }

  // z2: conv2_filters x (B * p2 * p2) -> feat_dim x B.
  const int ss = s.p2 * s.p2;
  Mat<Scalar> feats(s.feat_dim, batch);
  for (int b = 0; b < batch; ++b)
    for (int c = 0; c < p.cfg.conv2_filters; ++c)
      feats.col(b).segment(static_cast<Eigen::Index>(c) * ss, ss) =
          z2.row(c).segment(static_cast<Eigen::Index>(b) * ss, ss).transpose();
  return feats;
}

template <class Scalar>
void cnn_backward_batch(const NetParamsT<Scalar>& p, const CnnCache<Scalar>& cache,
                        const Mat<Scalar>& dfeats, NetGradsT<Scalar>& g) {
  const ConvShapes s = net_shapes(p.cfg);
  const int batch = static_cast<int>(dfeats.cols());
  const int ss = s.p2 * s.p2;

  Mat<Scalar> dz2(p.cfg.conv2_filters, static_cast<Eigen::Index>(batch) * ss);
  for (int b = 0; b < batch; ++b)
    for (int c = 0; c < p.cfg.conv2_filters; ++c)
      dz2.row(c).segment(static_cast<Eigen::Index>(b) * ss, ss) =
          dfeats.col(b).segment(static_cast<Eigen::Index>(c) * ss, ss).transpose();

  Mat<Scalar> da2 = pool_backward(cache.pool2, dz2);
  da2 = (cache.relu2.array() > Scalar(0)).select(da2, Scalar(0));
  Mat<Scalar> dz1 = conv_backward(p.conv2, cache.conv2, da2, g.conv2_w, g.conv2_b, true);

  Mat<Scalar> da1 = pool_backward(cache.pool1, dz1);
  da1 = (cache.relu1.array() > Scalar(0)).select(da1, Scalar(0));
  conv_backward(p.conv1, cache.conv1, da1, g.conv1_w, g.conv1_b, false);
}

// Single-image convenience wrapper.
template <class Scalar>
Vec<Scalar> cnn_forward(const NetParamsT<Scalar>& p, const ImageT<Scalar>& x) {
  return cnn_forward_batch(p, x, 1).col(0);
}

// ---- recurrent cells (batched; columns are samples) ----

template <class Scalar>
struct LstmStepCache {
  Mat<Scalar> x, h_prev, c_prev, i, f, g, o, c, tanh_c;
};

template <class Scalar>
struct GruStepCache {
  Mat<Scalar> x, h_prev, z, r, n, hn;  // hn = Wn_h * h_prev
};

template <class Scalar>
Mat<Scalar> lstm_step_batch(const RnnLayer<Scalar>& p, const Mat<Scalar>& x,
                            const Mat<Scalar>& h_prev, const Mat<Scalar>& c_prev,
                            Mat<Scalar>& c_out, LstmStepCache<Scalar>* cache = nullptr) {
  const Eigen::Index u = h_prev.rows();
  Mat<Scalar> pre = p.wx * x + p.wh * h_prev;
  pre.colwise() += p.b;
  const Mat<Scalar> i = detail::sigmoid(Mat<Scalar>(pre.topRows(u)));
  const Mat<Scalar> f = detail::sigmoid(Mat<Scalar>(pre.middleRows(u, u)));
  const Mat<Scalar> g = pre.middleRows(2 * u, u).array().tanh().matrix();
  const Mat<Scalar> o = detail::sigmoid(Mat<Scalar>(pre.bottomRows(u)));
  c_out = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
  const Mat<Scalar> tanh_c = c_out.array().tanh().matrix();
  Mat<Scalar> h = o.cwiseProduct(tanh_c);
  if (cache) *cache = {x, h_prev, c_prev, i, f, g, o, c_out, tanh_c};
  return h;
}

template <class Scalar>
Mat<Scalar> gru_step_batch(const RnnLayer<Scalar>& p, const Mat<Scalar>& x,
                           const Mat<Scalar>& h_prev, GruStepCache<Scalar>* cache = nullptr) {
  const Eigen::Index u = h_prev.rows();
  Mat<Scalar> pre_zr = p.wx.topRows(2 * u) * x + p.wh.topRows(2 * u) * h_prev;
  pre_zr.colwise() += p.b.head(2 * u);
  const Mat<Scalar> z = detail::sigmoid(Mat<Scalar>(pre_zr.topRows(u)));
  const Mat<Scalar> r = detail::sigmoid(Mat<Scalar>(pre_zr.bottomRows(u)));

  const Mat<Scalar> hn = p.wh.bottomRows(u) * h_prev;
  Mat<Scalar> pre_n = p.wx.bottomRows(u) * x + r.cwiseProduct(hn);
  pre_n.colwise() += p.b.tail(u);
  const Mat<Scalar> n = pre_n.array().tanh().matrix();

  Mat<Scalar> h = z.cwiseProduct(h_prev) + (Mat<Scalar>::Ones(u, x.cols()) - z).cwiseProduct(n);
  if (cache) *cache = {x, h_prev, z, r, n, hn};
  return h;
}

// Single-sample cell step; for LSTM both h and c are carried, for GRU only h.
template <class Scalar>
struct CellState {
  Vec<Scalar> h, c;
};

template <class Scalar>
CellState<Scalar> cell_step(RnnCell cell, const RnnLayer<Scalar>& p,
                            const CellState<Scalar>& prev, const Vec<Scalar>& x) {
  CellState<Scalar> next;
  if (cell == RnnCell::lstm) {
    Mat<Scalar> c_out;
    next.h = lstm_step_batch<Scalar>(p, x, prev.h, prev.c, c_out).col(0);
    next.c = c_out.col(0);
  } else {
    next.h = gru_step_batch<Scalar>(p, x, prev.h).col(0);
    next.c = Vec<Scalar>();
  }
  return next;
}

template <class Scalar>
struct RnnLayerTrace {
  std::vector<LstmStepCache<Scalar>> lstm;
  std::vector<GruStepCache<Scalar>> gru;
  std::vector<Mat<Scalar>> h;  // h per step
};

template <class Scalar>
void rnn_layer_forward(RnnCell cell, const RnnLayer<Scalar>& p,
                       const std::vector<Mat<Scalar>>& inputs, int batch,
                       RnnLayerTrace<Scalar>* trace, std::vector<Mat<Scalar>>& h_out) {
  const Eigen::Index u = p.wh.cols();
  Mat<Scalar> h = Mat<Scalar>::Zero(u, batch);
  Mat<Scalar> c = Mat<Scalar>::Zero(u, batch);
  h_out.clear();
  h_out.reserve(inputs.size());
  if (trace) {
    trace->lstm.clear();
    trace->gru.clear();
    trace->h.clear();
  }
  for (const Mat<Scalar>& x : inputs) {
    if (cell == RnnCell::lstm) {
      LstmStepCache<Scalar> cache;
      Mat<Scalar> c_next;
      h = lstm_step_batch(p, x, h, c, c_next, trace ? &cache : nullptr);
      c = std::move(c_next);
      if (trace) trace->lstm.push_back(std::move(cache));
    } else {
      GruStepCache<Scalar> cache;
      h = gru_step_batch(p, x, h, trace ? &cache : nullptr);
      if (trace) trace->gru.push_back(std::move(cache));
    }
    h_out.push_back(h);
    if (trace) trace->h.push_back(h);
  }
}

// Backward through one recurrent layer. dh_ext[t] is the gradient arriving at h_t from
// outside the layer (next layer and/or the loss); returns d(input) per step.
template <class Scalar>
std::vector<Mat<Scalar>> rnn_layer_backward(RnnCell cell, const RnnLayer<Scalar>& p,
                                            const RnnLayerTrace<Scalar>& trace,
                                            const std::vector<Mat<Scalar>>& dh_ext,
                                            Mat<Scalar>& dwx, Mat<Scalar>& dwh,
                                            Vec<Scalar>& db) {
  const int steps = static_cast<int>(dh_ext.size());
  const Eigen::Index u = p.wh.cols();
  const Eigen::Index batch = dh_ext.empty() ? 0 : dh_ext[0].cols();
  std::vector<Mat<Scalar>> dx(static_cast<std::size_t>(steps));

  Mat<Scalar> dh_rec = Mat<Scalar>::Zero(u, batch);
  Mat<Scalar> dc_rec = Mat<Scalar>::Zero(u, batch);
  for (int t = steps - 1; t >= 0; --t) {
    const Mat<Scalar> dh = dh_ext[static_cast<std::size_t>(t)] + dh_rec;
    if (cell == RnnCell::lstm) {
      const LstmStepCache<Scalar>& s = trace.lstm[static_cast<std::size_t>(t)];
      const Mat<Scalar> d_o = dh.cwiseProduct(s.tanh_c);
      const Mat<Scalar> dc = dh.cwiseProduct(s.o).cwiseProduct(
                                 (Scalar(1) - s.tanh_c.array().square()).matrix()) +
                             dc_rec;
      const Mat<Scalar> di = dc.cwiseProduct(s.g);
      const Mat<Scalar> df = dc.cwiseProduct(s.c_prev);
      const Mat<Scalar> dg = dc.cwiseProduct(s.i);

      Mat<Scalar> dpre(4 * u, batch);
      dpre.topRows(u) = di.cwiseProduct(s.i).cwiseProduct((Scalar(1) - s.i.array()).matrix());
      dpre.middleRows(u, u) =
          df.cwiseProduct(s.f).cwiseProduct((Scalar(1) - s.f.array()).matrix());
      dpre.middleRows(2 * u, u) = dg.cwiseProduct((Scalar(1) - s.g.array().square()).matrix());
      dpre.bottomRows(u) = d_o.cwiseProduct(s.o).cwiseProduct((Scalar(1) - s.o.array()).matrix());

      dwx.noalias() += dpre * s.x.transpose();
      dwh.noalias() += dpre * s.h_prev.transpose();
      db.noalias() += dpre.rowwise().sum();
      dx[static_cast<std::size_t>(t)] = p.wx.transpose() * dpre;
      dh_rec = p.wh.transpose() * dpre;
      dc_rec = dc.cwiseProduct(s.f);
    } else {
      const GruStepCache<Scalar>& s = trace.gru[static_cast<std::size_t>(t)];
      const Mat<Scalar> dz = dh.cwiseProduct(s.h_prev - s.n);
      const Mat<Scalar> dn = dh.cwiseProduct((Scalar(1) - s.z.array()).matrix());
      const Mat<Scalar> dan = dn.cwiseProduct((Scalar(1) - s.n.array().square()).matrix());
      const Mat<Scalar> dr = dan.cwiseProduct(s.hn);
      const Mat<Scalar> dhn = dan.cwiseProduct(s.r);
      const Mat<Scalar> daz = dz.cwiseProduct(s.z).cwiseProduct((Scalar(1) - s.z.array()).matrix());
      const Mat<Scalar> dar = dr.cwiseProduct(s.r).cwiseProduct((Scalar(1) - s.r.array()).matrix());

      Mat<Scalar> dpre_zr(2 * u, batch);
      dpre_zr.topRows(u) = daz;
      dpre_zr.bottomRows(u) = dar;

      dwx.topRows(2 * u).noalias() += dpre_zr * s.x.transpose();
      dwx.bottomRows(u).noalias() += dan * s.x.transpose();
      dwh.topRows(2 * u).noalias() += dpre_zr * s.h_prev.transpose();
      dwh.bottomRows(u).noalias() += dhn * s.h_prev.transpose();
      db.head(2 * u).noalias() += dpre_zr.rowwise().sum();
      db.tail(u).noalias() += dan.rowwise().sum();

      dx[static_cast<std::size_t>(t)] =
          p.wx.topRows(2 * u).transpose() * dpre_zr + p.wx.bottomRows(u).transpose() * dan;
      dh_rec = dh.cwiseProduct(s.z) + p.wh.topRows(2 * u).transpose() * dpre_zr +
               p.wh.bottomRows(u).transpose() * dhn;
    }
  }
  return dx;
}

// ---- dense / softmax ----

template <class Scalar>
Mat<Scalar> dense_forward(const DenseLayer<Scalar>& layer, const Mat<Scalar>& x) {
  Mat<Scalar> out = layer.w * x;
  out.colwise() += layer.b;
  return out;
}

template <class Scalar>
Mat<Scalar> dense_backward(const DenseLayer<Scalar>& layer, const Mat<Scalar>& x,
                           const Mat<Scalar>& dout, Mat<Scalar>& dw, Vec<Scalar>& db) {
  dw.noalias() += dout * x.transpose();
  db.noalias() += dout.rowwise().sum();
  return layer.w.transpose() * dout;
}

template <class Scalar>
Mat<Scalar> softmax(const Mat<Scalar>& logits) {
  Mat<Scalar> p(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const Vec<Scalar> shifted = logits.col(c).array() - logits.col(c).maxCoeff();
    Vec<Scalar> e = shifted.array().exp();
    p.col(c) = e / e.sum();
  }
  return p;
}

// Mean cross-entropy over the batch; dlogits = (probs - onehot) / batch.
template <class Scalar>
double cross_entropy(const Mat<Scalar>& probs, const std::vector<int>& labels,
                     Mat<Scalar>* dlogits = nullptr) {
  const Eigen::Index batch = probs.cols();
  if (static_cast<std::size_t>(batch) != labels.size())
    throw std::invalid_argument("label count mismatch");
  double loss = 0.0;
  if (dlogits) *dlogits = probs / static_cast<Scalar>(batch);
  for (Eigen::Index c = 0; c < batch; ++c) {
    const int label = labels[static_cast<std::size_t>(c)];
    if (label < 0 || label >= probs.rows()) throw std::invalid_argument("label out of range");
    loss -= std::log(std::max(double(probs(label, c)), 1e-300));
    if (dlogits) (*dlogits)(label, c) -= Scalar(1) / static_cast<Scalar>(batch);
  }
  return loss / static_cast<double>(batch);
}

// ---- full network forward ----

template <class Scalar>
struct RnnTrace {
  RnnLayerTrace<Scalar> layer1, layer2;
  Mat<Scalar> dense_in, dense_act, probs;  // dense_act is post-ReLU
};

// feats: kSeqLen matrices of feat_dim x batch. Returns class probabilities per column.
template <class Scalar>
Mat<Scalar> rnn_forward_batch(const NetParamsT<Scalar>& p, const std::vector<Mat<Scalar>>& feats,
                              int batch, RnnTrace<Scalar>* trace = nullptr) {
  if (static_cast<int>(feats.size()) != kSeqLen)
    throw std::invalid_argument("sequence must have 12 steps");
  std::vector<Mat<Scalar>> h1, h2;
  rnn_layer_forward(p.cfg.cell, p.rnn1, feats, batch, trace ? &trace->layer1 : nullptr, h1);
  rnn_layer_forward(p.cfg.cell, p.rnn2, h1, batch, trace ? &trace->layer2 : nullptr, h2);

  const Mat<Scalar>& last = h2.back();
  Mat<Scalar> act = dense_forward(p.dense, last).cwiseMax(Scalar(0));
  Mat<Scalar> probs = softmax(Mat<Scalar>(dense_forward(p.head, act)));
  if (trace) {
    trace->dense_in = last;
    trace->dense_act = std::move(act);
    trace->probs = probs;
  }
  return probs;
}

template <class Scalar>
Vec<Scalar> rnn_forward(const NetParamsT<Scalar>& p, const std::vector<Vec<Scalar>>& feats) {
  std::vector<Mat<Scalar>> cols;
  cols.reserve(feats.size());
  for (const Vec<Scalar>& f : feats) cols.push_back(f);
  return rnn_forward_batch(p, cols, 1).col(0);
}

template <class Scalar>
std::vector<Mat<Scalar>> sequence_features(const NetParamsT<Scalar>& p,
                                           const std::vector<const SequenceT<Scalar>*>& batch) {
  const ConvShapes s = net_shapes(p.cfg);
  const int b = static_cast<int>(batch.size());
  std::vector<Mat<Scalar>> feats;
  feats.reserve(kSeqLen);
  Mat<Scalar> packed(p.cfg.in_channels, static_cast<Eigen::Index>(b) * s.image * s.image);
  for (int t = 0; t < kSeqLen; ++t) {
    for (int i = 0; i < b; ++i) {
      const SequenceT<Scalar>& seq = *batch[static_cast<std::size_t>(i)];
      if (static_cast<int>(seq.steps.size()) != kSeqLen)
        throw std::invalid_argument("sequence must have 12 steps");
      packed.middleCols(static_cast<Eigen::Index>(i) * s.image * s.image, s.image * s.image) =
          seq.steps[static_cast<std::size_t>(t)];
    }
    feats.push_back(cnn_forward_batch(p, packed, b));
  }
  return feats;
}

template <class Scalar>
Vec<Scalar> predict_proba(const NetParamsT<Scalar>& p, const SequenceT<Scalar>& s) {
  std::vector<const SequenceT<Scalar>*> one{&s};
  return rnn_forward_batch(p, sequence_features(p, one), 1).col(0);
}

template <class Scalar>
int predict(const NetParamsT<Scalar>& p, const SequenceT<Scalar>& s) {
  const Vec<Scalar> probs = predict_proba(p, s);
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < probs.size(); ++k)
    if (probs(k) > probs(best)) best = k;  // ties keep the lowest index
  return static_cast<int>(best);
}

// ---- gradients ----

template <class Scalar>
NetGradsT<Scalar> zero_grads(const NetParamsT<Scalar>& p) {
  NetGradsT<Scalar> g;
  g.conv1_w = Mat<Scalar>::Zero(p.conv1.w.rows(), p.conv1.w.cols());
  g.conv1_b = Vec<Scalar>::Zero(p.conv1.b.size());
  g.conv2_w = Mat<Scalar>::Zero(p.conv2.w.rows(), p.conv2.w.cols());
  g.conv2_b = Vec<Scalar>::Zero(p.conv2.b.size());
  g.rnn1_wx = Mat<Scalar>::Zero(p.rnn1.wx.rows(), p.rnn1.wx.cols());
  g.rnn1_wh = Mat<Scalar>::Zero(p.rnn1.wh.rows(), p.rnn1.wh.cols());
  g.rnn1_b = Vec<Scalar>::Zero(p.rnn1.b.size());
  g.rnn2_wx = Mat<Scalar>::Zero(p.rnn2.wx.rows(), p.rnn2.wx.cols());
  g.rnn2_wh = Mat<Scalar>::Zero(p.rnn2.wh.rows(), p.rnn2.wh.cols());
  g.rnn2_b = Vec<Scalar>::Zero(p.rnn2.b.size());
  g.dense_w = Mat<Scalar>::Zero(p.dense.w.rows(), p.dense.w.cols());
  g.dense_b = Vec<Scalar>::Zero(p.dense.b.size());
  g.head_w = Mat<Scalar>::Zero(p.head.w.rows(), p.head.w.cols());
  g.head_b = Vec<Scalar>::Zero(p.head.b.size());
  return g;
}

// Loss + gradients of the recurrent half on precomputed features. dfeats, when
// requested, receives the gradient w.r.t. each step's features.
template <class Scalar>
double rnn_grads(const NetParamsT<Scalar>& p, const std::vector<Mat<Scalar>>& feats,
                 const std::vector<int>& labels, NetGradsT<Scalar>& g,
                 std::vector<Mat<Scalar>>* dfeats = nullptr) {
  const int batch = static_cast<int>(labels.size());
  RnnTrace<Scalar> trace;
  rnn_forward_batch(p, feats, batch, &trace);

  Mat<Scalar> dlogits;
  const double loss = cross_entropy(trace.probs, labels, &dlogits);

  Mat<Scalar> dact = dense_backward(p.head, trace.dense_act, dlogits, g.head_w, g.head_b);
  dact = (trace.dense_act.array() > Scalar(0)).select(dact, Scalar(0));
  const Mat<Scalar> dlast = dense_backward(p.dense, trace.dense_in, dact, g.dense_w, g.dense_b);

  const Eigen::Index u = p.rnn2.wh.cols();
  std::vector<Mat<Scalar>> dh2(kSeqLen, Mat<Scalar>::Zero(u, batch));
  dh2.back() = dlast;
  const std::vector<Mat<Scalar>> dh1 =
      rnn_layer_backward(p.cfg.cell, p.rnn2, trace.layer2, dh2, g.rnn2_wx, g.rnn2_wh, g.rnn2_b);
  std::vector<Mat<Scalar>> dx =
      rnn_layer_backward(p.cfg.cell, p.rnn1, trace.layer1, dh1, g.rnn1_wx, g.rnn1_wh, g.rnn1_b);
  if (dfeats) *dfeats = std::move(dx);
  return loss;
}

// End-to-end loss + gradients (conv included) for a batch of sequences.
template <class Scalar>
double seq_grads(const NetParamsT<Scalar>& p, const std::vector<const SequenceT<Scalar>*>& batch,
                 NetGradsT<Scalar>& g) {
  const ConvShapes s = net_shapes(p.cfg);
  const int b = static_cast<int>(batch.size());
  std::vector<CnnCache<Scalar>> caches(kSeqLen);
  std::vector<Mat<Scalar>> feats;
  feats.reserve(kSeqLen);
  Mat<Scalar> packed(p.cfg.in_channels, static_cast<Eigen::Index>(b) * s.image * s.image);
  for (int t = 0; t < kSeqLen; ++t) {
    for (int i = 0; i < b; ++i)
      packed.middleCols(static_cast<Eigen::Index>(i) * s.image * s.image, s.image * s.image) =
          batch[static_cast<std::size_t>(i)]->steps[static_cast<std::size_t>(t)];
    feats.push_back(cnn_forward_batch(p, packed, b, &caches[static_cast<std::size_t>(t)]));
  }

  std::vector<int> labels;
  labels.reserve(batch.size());
  for (const SequenceT<Scalar>* seq : batch) labels.push_back(seq->label);

  std::vector<Mat<Scalar>> dfeats;
  const double loss = rnn_grads(p, feats, labels, g, &dfeats);
  for (int t = 0; t < kSeqLen; ++t)
    cnn_backward_batch(p, caches[static_cast<std::size_t>(t)],
                       dfeats[static_cast<std::size_t>(t)], g);
  return loss;
}

// ---- training ----

namespace detail {

template <class Scalar>
struct ParamRef {
  Mat<Scalar>* m = nullptr;
  Vec<Scalar>* v = nullptr;
};

template <class Scalar>
std::vector<ParamRef<Scalar>> rnn_side_params(NetParamsT<Scalar>& p) {
  return {{&p.rnn1.wx, nullptr}, {&p.rnn1.wh, nullptr}, {nullptr, &p.rnn1.b},
          {&p.rnn2.wx, nullptr}, {&p.rnn2.wh, nullptr}, {nullptr, &p.rnn2.b},
          {&p.dense.w, nullptr}, {nullptr, &p.dense.b},
          {&p.head.w, nullptr},  {nullptr, &p.head.b}};
}

template <class Scalar>
std::vector<ParamRef<Scalar>> rnn_side_grads(NetGradsT<Scalar>& g) {
  return {{&g.rnn1_wx, nullptr}, {&g.rnn1_wh, nullptr}, {nullptr, &g.rnn1_b},
          {&g.rnn2_wx, nullptr}, {&g.rnn2_wh, nullptr}, {nullptr, &g.rnn2_b},
          {&g.dense_w, nullptr}, {nullptr, &g.dense_b},
          {&g.head_w, nullptr},  {nullptr, &g.head_b}};
}

template <class Scalar>
void sgd_update(const std::vector<ParamRef<Scalar>>& params,
                const std::vector<ParamRef<Scalar>>& grads,
                const std::vector<ParamRef<Scalar>>& vels, Scalar lr, Scalar momentum) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].m) {
      *vels[i].m = momentum * *vels[i].m - lr * *grads[i].m;
      *params[i].m += *vels[i].m;
    } else {
      *vels[i].v = momentum * *vels[i].v - lr * *grads[i].v;
      *params[i].v += *vels[i].v;
    }
  }
}

template <class Scalar>
double grad_sq_norm(const std::vector<ParamRef<Scalar>>& grads) {
  double total = 0.0;
  for (const ParamRef<Scalar>& g : grads) {
    if (g.m) total += double(g.m->squaredNorm());
    else total += double(g.v->squaredNorm());
  }
  return total;
}

template <class Scalar>
void scale_grads(const std::vector<ParamRef<Scalar>>& grads, Scalar scale) {
  for (const ParamRef<Scalar>& g : grads) {
    if (g.m) *g.m *= scale;
    else *g.v *= scale;
  }
}

template <class Scalar>
int argmax_hits(const Mat<Scalar>& probs, const std::vector<int>& labels) {
  int hits = 0;
  for (Eigen::Index c = 0; c < probs.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < probs.rows(); ++k)
      if (probs(k, c) > probs(best, c)) best = k;
    if (best == labels[static_cast<std::size_t>(c)]) ++hits;
  }
  return hits;
}

}  // namespace detail

// Two-step training: step 1 fits the conv stack plus a temporary softmax head on
// individual fully-sampled frames; step 2 freezes the conv parameters and fits the
// recurrent half on the 12-step sequences.
template <class Scalar>
NetParamsT<Scalar> train_two_step(const std::vector<TrainSampleT<Scalar>>& data,
                                  const NetConfig& cfg, TrainLog* log = nullptr) {
  if (data.empty()) throw std::invalid_argument("empty training set");
  {
    std::vector<bool> seen(static_cast<std::size_t>(cfg.n_classes), false);
    for (const TrainSampleT<Scalar>& sample : data) {
      if (sample.seq.label < 0 || sample.seq.label >= cfg.n_classes)
        throw std::invalid_argument("label out of range");
      seen[static_cast<std::size_t>(sample.seq.label)] = true;
    }
    for (bool b : seen)
      if (!b) throw std::invalid_argument("class absent from training set");
  }

  const ConvShapes shapes = net_shapes(cfg);
  std::mt19937_64 rng(cfg.seed);
  NetParamsT<Scalar> p = init_params<Scalar>(cfg, rng);

  // Step 1: conv + temporary head on individual frames.
  DenseLayer<Scalar> tmp_head;
  tmp_head.w.resize(cfg.n_classes, shapes.feat_dim);
  tmp_head.b = Vec<Scalar>::Zero(cfg.n_classes);
  detail::init_uniform(tmp_head.w, 1.0 / std::sqrt(double(shapes.feat_dim)), rng);

  struct FrameRef {
    const ImageT<Scalar>* image;
    int label;
  };
  std::vector<FrameRef> frames;
  for (const TrainSampleT<Scalar>& sample : data)
    for (const ImageT<Scalar>& f : sample.frames) frames.push_back({&f, sample.seq.label});
  if (frames.empty()) throw std::invalid_argument("no frames for step 1");

  const Scalar lr = static_cast<Scalar>(cfg.lr);
  const Scalar momentum = static_cast<Scalar>(cfg.momentum);

  Mat<Scalar> v_c1w = Mat<Scalar>::Zero(p.conv1.w.rows(), p.conv1.w.cols());
  Vec<Scalar> v_c1b = Vec<Scalar>::Zero(p.conv1.b.size());
  Mat<Scalar> v_c2w = Mat<Scalar>::Zero(p.conv2.w.rows(), p.conv2.w.cols());
  Vec<Scalar> v_c2b = Vec<Scalar>::Zero(p.conv2.b.size());
  Mat<Scalar> v_hw = Mat<Scalar>::Zero(tmp_head.w.rows(), tmp_head.w.cols());
  Vec<Scalar> v_hb = Vec<Scalar>::Zero(tmp_head.b.size());

  std::vector<std::size_t> order(frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const int px = shapes.image * shapes.image;
  for (int epoch = 0; epoch < cfg.epochs_cnn; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int hits = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const int b = static_cast<int>(
          std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), order.size() - start));
      Mat<Scalar> packed(cfg.in_channels, static_cast<Eigen::Index>(b) * px);
      std::vector<int> labels(static_cast<std::size_t>(b));
      for (int i = 0; i < b; ++i) {
        const FrameRef& ref = frames[order[start + static_cast<std::size_t>(i)]];
        packed.middleCols(static_cast<Eigen::Index>(i) * px, px) = *ref.image;
        labels[static_cast<std::size_t>(i)] = ref.label;
      }

      CnnCache<Scalar> cache;
      const Mat<Scalar> feats = cnn_forward_batch(p, packed, b, &cache);
      const Mat<Scalar> probs = softmax(Mat<Scalar>(dense_forward(tmp_head, feats)));
      Mat<Scalar> dlogits;
      loss_sum += cross_entropy(probs, labels, &dlogits) * b;
      hits += detail::argmax_hits(probs, labels);

      NetGradsT<Scalar> g = zero_grads(p);
      Mat<Scalar> dhw = Mat<Scalar>::Zero(tmp_head.w.rows(), tmp_head.w.cols());
      Vec<Scalar> dhb = Vec<Scalar>::Zero(tmp_head.b.size());
      const Mat<Scalar> dfeats = dense_backward(tmp_head, feats, dlogits, dhw, dhb);
      cnn_backward_batch(p, cache, dfeats, g);

      v_c1w = momentum * v_c1w - lr * g.conv1_w;
      p.conv1.w += v_c1w;
      v_c1b = momentum * v_c1b - lr * g.conv1_b;
      p.conv1.b += v_c1b;
      v_c2w = momentum * v_c2w - lr * g.conv2_w;
      p.conv2.w += v_c2w;
      v_c2b = momentum * v_c2b - lr * g.conv2_b;
      p.conv2.b += v_c2b;
      v_hw = momentum * v_hw - lr * dhw;
      tmp_head.w += v_hw;
      v_hb = momentum * v_hb - lr * dhb;
      tmp_head.b += v_hb;
    }
    if (log) {
      log->cnn_loss.push_back(loss_sum / static_cast<double>(frames.size()));
      log->cnn_acc.push_back(static_cast<double>(hits) / static_cast<double>(frames.size()));
    }
  }

  // Step 2: conv frozen; features are therefore fixed and computed once.
  std::vector<const SequenceT<Scalar>*> seqs;
  seqs.reserve(data.size());
  for (const TrainSampleT<Scalar>& sample : data) seqs.push_back(&sample.seq);
  const std::vector<Mat<Scalar>> all_feats = sequence_features(p, seqs);

  NetGradsT<Scalar> g = zero_grads(p);
  NetGradsT<Scalar> vel = zero_grads(p);

  std::vector<std::size_t> seq_order(data.size());
  for (std::size_t i = 0; i < seq_order.size(); ++i) seq_order[i] = i;

  const Eigen::Index feat_dim = all_feats[0].rows();
  for (int epoch = 0; epoch < cfg.epochs_rnn; ++epoch) {
    std::shuffle(seq_order.begin(), seq_order.end(), rng);
    double loss_sum = 0.0;
    int hits = 0;
    for (std::size_t start = 0; start < seq_order.size();
         start += static_cast<std::size_t>(cfg.batch)) {
      const int b = static_cast<int>(
          std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), seq_order.size() - start));
      std::vector<Mat<Scalar>> feats(kSeqLen, Mat<Scalar>(feat_dim, b));
      std::vector<int> labels(static_cast<std::size_t>(b));
      for (int i = 0; i < b; ++i) {
        const std::size_t at = seq_order[start + static_cast<std::size_t>(i)];
        for (int t = 0; t < kSeqLen; ++t)
          feats[static_cast<std::size_t>(t)].col(i) =
              all_feats[static_cast<std::size_t>(t)].col(static_cast<Eigen::Index>(at));
        labels[static_cast<std::size_t>(i)] = data[at].seq.label;
      }

      auto gref = detail::rnn_side_grads(g);
      for (auto& ref : gref) {
        if (ref.m) ref.m->setZero();
        else ref.v->setZero();
      }
      RnnTrace<Scalar> trace;
      rnn_forward_batch(p, feats, b, &trace);
      Mat<Scalar> dlogits;
      loss_sum += cross_entropy(trace.probs, labels, &dlogits) * b;
      hits += detail::argmax_hits(trace.probs, labels);

      Mat<Scalar> dact = dense_backward(p.head, trace.dense_act, dlogits, g.head_w, g.head_b);
      dact = (trace.dense_act.array() > Scalar(0)).select(dact, Scalar(0));
      const Mat<Scalar> dlast = dense_backward(p.dense, trace.dense_in, dact, g.dense_w, g.dense_b);
      std::vector<Mat<Scalar>> dh2(kSeqLen, Mat<Scalar>::Zero(p.rnn2.wh.cols(), b));
      dh2.back() = dlast;
      const std::vector<Mat<Scalar>> dh1 = rnn_layer_backward(p.cfg.cell, p.rnn2, trace.layer2,
                                                              dh2, g.rnn2_wx, g.rnn2_wh, g.rnn2_b);
      rnn_layer_backward(p.cfg.cell, p.rnn1, trace.layer1, dh1, g.rnn1_wx, g.rnn1_wh, g.rnn1_b);

      const double norm = std::sqrt(detail::grad_sq_norm(gref));
      if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm)
        detail::scale_grads(gref, static_cast<Scalar>(cfg.clip_norm / norm));

      detail::sgd_update(detail::rnn_side_params(p), gref, detail::rnn_side_grads(vel), lr,
                         momentum);
    }
    if (log) {
      log->rnn_loss.push_back(loss_sum / static_cast<double>(data.size()));
      log->rnn_acc.push_back(static_cast<double>(hits) / static_cast<double>(data.size()));
    }
  }
  return p;
}

// ---- finite-difference verification ----

namespace detail {

// Normalized distance ||analytic - numeric|| / (||analytic|| + ||numeric||) over one
// contiguous parameter group.
template <class Scalar, class LossFn>
double span_fd_error(Scalar* param, const Scalar* analytic, Eigen::Index size, double eps,
                     LossFn loss) {
  double an2 = 0.0, nu2 = 0.0, diff2 = 0.0;
  for (Eigen::Index i = 0; i < size; ++i) {
    const Scalar keep = param[i];
    param[i] = keep + static_cast<Scalar>(eps);
    const double up = loss();
    param[i] = keep - static_cast<Scalar>(eps);
    const double down = loss();
    param[i] = keep;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = static_cast<double>(analytic[i]);
    an2 += a * a;
    nu2 += numeric * numeric;
    diff2 += (a - numeric) * (a - numeric);
  }
  return std::sqrt(diff2) / (std::sqrt(an2) + std::sqrt(nu2) + 1e-300);
}

}  // namespace detail

// Max (over parameter groups) normalized distance between analytic and central-difference
// gradients of the mean sequence cross-entropy.
template <class Scalar>
double grad_check(NetParamsT<Scalar>& p, const std::vector<SequenceT<Scalar>>& batch,
                  double eps = 1e-5) {
  std::vector<const SequenceT<Scalar>*> refs;
  refs.reserve(batch.size());
  for (const SequenceT<Scalar>& s : batch) refs.push_back(&s);

  NetGradsT<Scalar> g = zero_grads(p);
  seq_grads(p, refs, g);

  auto loss = [&] {
    NetGradsT<Scalar> scratch = zero_grads(p);
    return seq_grads(p, refs, scratch);
  };

  double worst = 0.0;
  auto check_m = [&](Mat<Scalar>& param, const Mat<Scalar>& analytic) {
    worst = std::max(worst,
                     detail::span_fd_error(param.data(), analytic.data(), param.size(), eps, loss));
  };
  auto check_v = [&](Vec<Scalar>& param, const Vec<Scalar>& analytic) {
    worst = std::max(worst,
                     detail::span_fd_error(param.data(), analytic.data(), param.size(), eps, loss));
  };
  check_m(p.conv1.w, g.conv1_w);
  check_v(p.conv1.b, g.conv1_b);
  check_m(p.conv2.w, g.conv2_w);
  check_v(p.conv2.b, g.conv2_b);
  check_m(p.rnn1.wx, g.rnn1_wx);
  check_m(p.rnn1.wh, g.rnn1_wh);
  check_v(p.rnn1.b, g.rnn1_b);
  check_m(p.rnn2.wx, g.rnn2_wx);
  check_m(p.rnn2.wh, g.rnn2_wh);
  check_v(p.rnn2.b, g.rnn2_b);
  check_m(p.dense.w, g.dense_w);
  check_v(p.dense.b, g.dense_b);
  check_m(p.head.w, g.head_w);
  check_v(p.head.b, g.head_b);
  return worst;
}

// ---- checkpoints (float parameters, little-endian payload) ----

void save_checkpoint(const NetParamsT<float>& p, const std::string& path);
NetParamsT<float> load_checkpoint(const std::string& path);

}  // namespace eegvid

#include "eegvid/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace eegvid {

ProjectedLayout aep_project(const ElectrodeLayout& layout) {
  if (layout.size() < 3) throw std::invalid_argument("layout needs at least 3 electrodes");

  ProjectedLayout proj;
  proj.points.reserve(layout.positions.size());
  for (const Eigen::Vector3d& p : layout.positions) {
    const double theta = std::atan2(p.y(), p.x());
    const double rho = std::numbers::pi / 2.0 - std::asin(std::clamp(p.z(), -1.0, 1.0));
    proj.points.emplace_back(rho * std::cos(theta), rho * std::sin(theta));
  }

  Eigen::Vector2d lo = proj.points.front();
  Eigen::Vector2d hi = proj.points.front();
  for (const Eigen::Vector2d& q : proj.points) {
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  // Tight covering square, 5% margin, so the pixel mapping is stable.
  const double side = std::max((hi - lo).maxCoeff(), 1e-9) * 1.05;
  const Eigen::Vector2d center = 0.5 * (lo + hi);
  proj.square_min = center.array() - side / 2.0;
  proj.square_side = side;
  return proj;
}

MatD raster_weights(const ProjectedLayout& proj) {
  const int n = static_cast<int>(proj.points.size());
  if (n < 1) throw std::invalid_argument("projected layout is empty");
  if (!(proj.square_side > 0.0)) throw std::invalid_argument("bounding square has no extent");
  const int k = std::min(4, n);

  MatD w = MatD::Zero(kFrameSize * kFrameSize, n);
  std::vector<std::pair<double, int>> dist(n);
  for (int row = 0; row < kFrameSize; ++row) {
    for (int col = 0; col < kFrameSize; ++col) {
      const Eigen::Vector2d c = proj.pixel_center(row, col);
      for (int e = 0; e < n; ++e) dist[e] = {(proj.points[e] - c).norm(), e};
      std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

      const int pix = row * kFrameSize + col;
      if (dist[0].first < 1e-9) {
        w(pix, dist[0].second) = 1.0;  // pixel sits on an electrode
        continue;
      }
      double total = 0.0;
      for (int i = 0; i < k; ++i) total += 1.0 / (dist[i].first * dist[i].first);
      for (int i = 0; i < k; ++i)
        w(pix, dist[i].second) = 1.0 / (dist[i].first * dist[i].first) / total;
    }
  }
  return w;
}

Frame rasterize(const MatD& weights, const VecD& values) {
  if (weights.cols() != values.size()) throw std::invalid_argument("value count does not match layout");
  const VecD flat = weights * values;
  return Eigen::Map<const Eigen::Matrix<double, kFrameSize, kFrameSize, Eigen::RowMajor>>(flat.data());
}

Frame rasterize(const ProjectedLayout& proj, const VecD& values) {
  if (static_cast<Eigen::Index>(proj.points.size()) != values.size())
    throw std::invalid_argument("value count does not match layout");
  return rasterize(raster_weights(proj), values);
}

EegVideo make_video(const MatD& trial_band, const ProjectedLayout& proj) {
  if (trial_band.rows() != static_cast<Eigen::Index>(proj.points.size()))
    throw std::invalid_argument("channel count does not match layout");
  const MatD w = raster_weights(proj);
  EegVideo video;
  video.frames.reserve(trial_band.cols());
  for (Eigen::Index t = 0; t < trial_band.cols(); ++t)
    video.frames.push_back(rasterize(w, trial_band.col(t)));
  return video;
}

std::array<int, 13> segment_bounds(int total_frames) {
  std::array<int, 13> bounds;
  for (int i = 0; i <= 12; ++i)
    bounds[i] = static_cast<int>(std::lround(static_cast<double>(i) * total_frames / 12.0));
  return bounds;
}

EegVideo compress_video(const EegVideo& video) {
  const int total = static_cast<int>(video.frames.size());
  if (total < 12) throw std::invalid_argument("need at least 12 frames to compress");

  const auto bounds = segment_bounds(total);
  EegVideo out;
  out.band = video.band;
  out.label = video.label;
  out.frames.reserve(12);
  for (int i = 0; i < 12; ++i) {
    Frame acc = Frame::Zero();
    for (int t = bounds[i]; t < bounds[i + 1]; ++t) acc += video.frames[t];
    out.frames.push_back(acc / static_cast<double>(bounds[i + 1] - bounds[i]));
  }
  return out;
}

void frame_to_pgm(const Frame& frame, double lo, double hi, const std::string& path) {
  if (!(lo < hi)) throw std::invalid_argument("need lo < hi");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "P5\n" << kFrameSize << ' ' << kFrameSize << "\n255\n";
  for (int row = 0; row < kFrameSize; ++row) {
    for (int col = 0; col < kFrameSize; ++col) {
      const double v = 255.0 * (frame(row, col) - lo) / (hi - lo);
      const long byte = std::clamp(std::lround(v), 0L, 255L);
      out.put(static_cast<char>(static_cast<unsigned char>(byte)));
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace eegvid

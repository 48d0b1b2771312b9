#pragma once

#include "eegvid/dsp.hpp"
#include "eegvid/eegio.hpp"
#include "eegvid/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace eegvid {

/// Electrode positions on the projection plane plus the square that maps the
/// plane onto pixel space. The square is shared by every frame of a dataset.
struct ProjectedLayout {
  std::vector<Eigen::Vector2d> points;
  Eigen::Vector2d square_min;  // bottom-left corner
  double square_side = 0.0;

  /// Center of pixel (row, col); rows run top-down, y runs bottom-up.
  Eigen::Vector2d pixel_center(int row, int col) const {
    const double s = square_side / kFrameSize;
    return {square_min.x() + (col + 0.5) * s, square_min.y() + square_side - (row + 0.5) * s};
  }
};

/// Azimuthal equidistant projection with the vertex at the scalp apex (0,0,1):
/// angular distance from the vertex becomes planar radial distance.
ProjectedLayout aep_project(const ElectrodeLayout& layout);

/// Convex interpolation weights from electrodes to the 32x32 grid
/// (inverse-distance-squared over the 4 nearest electrodes); geometry only,
/// so one weight matrix serves every frame.
MatD raster_weights(const ProjectedLayout& proj);

Frame rasterize(const ProjectedLayout& proj, const VecD& values);
Frame rasterize(const MatD& weights, const VecD& values);

struct EegVideo {
  std::vector<Frame> frames;
  std::optional<RhythmBand> band;  // unset for the broadband video
  int label = 0;
};

/// One frame per time sample of a channels x time trial matrix.
EegVideo make_video(const MatD& trial_band, const ProjectedLayout& proj);

/// Segment boundaries round(i*T/12): every source frame lands in exactly one
/// of the 12 segments and the remainders spread evenly.
std::array<int, 13> segment_bounds(int total_frames);

/// Pixelwise mean over each of the 12 segments.
EegVideo compress_video(const EegVideo& video);

/// 8-bit binary PGM; pixel byte = clamp(round(255*(v-lo)/(hi-lo)), 0, 255).
void frame_to_pgm(const Frame& frame, double lo, double hi, const std::string& path);

}  // namespace eegvid

#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "eegvid/types.hpp"

namespace eegvid {

// Per-pixel (u,v) displacement in pixels/frame; u horizontal (+col), v vertical (+row
// in plot coordinates, i.e. +y of the frame's value grid).
struct FlowField {
  Frame u = Frame::Zero();
  Frame v = Frame::Zero();
};

// Per-pixel coefficients of the local quadratic model
//   f(p + d) ~ d^T A d + b^T d + c,  A = [[a11, a12], [a12, a22]].
struct PolyExpansion {
  Frame a11 = Frame::Zero();
  Frame a12 = Frame::Zero();
  Frame a22 = Frame::Zero();
  Frame b1 = Frame::Zero();
  Frame b2 = Frame::Zero();
  Frame c = Frame::Zero();
};

struct FlowConfig {
  double sigma = 1.5;     // Gaussian applicability std of the quadratic fit, pixels
  int window_radius = 4;  // aggregation window radius, pixels
  int iterations = 3;     // warping refinement passes
};

struct FlowDiagnostics {
  int degenerate_pixels = 0;  // pixels whose aggregate system was near-singular (last pass)
};

// Weighted least-squares fit of the quadratic model around every pixel; windows are
// clipped at the borders. Exact for globally quadratic inputs wherever the clipped
// window still determines all six coefficients.
PolyExpansion poly_expand(const Frame& f, double sigma);

// Two-frame displacement estimate: solves the aggregated A_bar d = delta_b system per
// pixel, refined over cfg.iterations warping passes. Degenerate pixels get zero flow.
FlowField estimate_flow(const Frame& f1, const Frame& f2, const FlowConfig& cfg = {},
                        FlowDiagnostics* diag = nullptr);

// Same estimate on precomputed expansions; lets callers share one expansion per frame
// across consecutive pairs.
FlowField estimate_flow(const PolyExpansion& p1, const PolyExpansion& p2,
                        const FlowConfig& cfg = {}, FlowDiagnostics* diag = nullptr);

struct RgbImage {
  std::array<std::uint8_t, static_cast<std::size_t>(kFrameSize) * kFrameSize * 3> data{};

  std::uint8_t& at(int row, int col, int channel) {
    return data[static_cast<std::size_t>((row * kFrameSize + col) * 3 + channel)];
  }
  std::uint8_t at(int row, int col, int channel) const {
    return data[static_cast<std::size_t>((row * kFrameSize + col) * 3 + channel)];
  }
};

// Direction -> Hue (atan2(v,u), zero angle = pure red), Saturation = 1,
// magnitude -> Value clamped at max_mag. Zero flow renders black.
RgbImage flow_to_hsv_image(const FlowField& fl, double max_mag);

// Binary 8-bit PPM (P6).
void write_ppm(const RgbImage& img, const std::string& path);

// Network-facing planes: channel 1 = clamp(|flow|/max_mag, 0, 1); channel 2 = direction
// under the affine [-pi,pi) -> [0,1) map, with zero flow mapped to 0 by convention.
std::array<Frame, 2> flow_channels(const FlowField& fl, double max_mag);

}  // namespace eegvid

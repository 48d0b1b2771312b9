#include "eegvid/flow.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace eegvid {
namespace {

std::vector<double> gaussian_profile(double sigma, int radius) {
  std::vector<double> w(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k)
    w[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * k * k / (sigma * sigma));
  return w;
}

}  // namespace

PolyExpansion poly_expand(const Frame& f, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  const auto prof = gaussian_profile(sigma, radius);

  PolyExpansion pe;
  Eigen::Matrix<double, 6, 6> g;
  Eigen::Matrix<double, 6, 1> h, phi;
  for (int row = 0; row < kFrameSize; ++row) {
    for (int col = 0; col < kFrameSize; ++col) {
      g.setZero();
      h.setZero();
      for (int dy = -radius; dy <= radius; ++dy) {
        const int r = row + dy;
        if (r < 0 || r >= kFrameSize) continue;
        for (int dx = -radius; dx <= radius; ++dx) {
          const int c = col + dx;
          if (c < 0 || c >= kFrameSize) continue;
          const double w = prof[static_cast<std::size_t>(dy + radius)] *
                           prof[static_cast<std::size_t>(dx + radius)];
          // Basis {1, x, y, x^2, y^2, xy}; x = +col offset, y = +row offset.
          phi << 1.0, dx, dy, double(dx) * dx, double(dy) * dy, double(dx) * dy;
          g.noalias() += w * phi * phi.transpose();
          h.noalias() += (w * f(r, c)) * phi;
        }
      }
      const Eigen::Matrix<double, 6, 1> theta = g.ldlt().solve(h);
      pe.c(row, col) = theta(0);
      pe.b1(row, col) = theta(1);
      pe.b2(row, col) = theta(2);
      pe.a11(row, col) = theta(3);
      pe.a22(row, col) = theta(4);
      pe.a12(row, col) = 0.5 * theta(5);
    }
  }
  return pe;
}

FlowField estimate_flow(const Frame& f1, const Frame& f2, const FlowConfig& cfg,
                        FlowDiagnostics* diag) {
  if (!(cfg.sigma > 0.0)) throw std::invalid_argument("bad flow config");
  return estimate_flow(poly_expand(f1, cfg.sigma), poly_expand(f2, cfg.sigma), cfg, diag);
}

FlowField estimate_flow(const PolyExpansion& p1, const PolyExpansion& p2, const FlowConfig& cfg,
                        FlowDiagnostics* diag) {
  if (cfg.window_radius < 0 || cfg.iterations < 1)
    throw std::invalid_argument("bad flow config");

  const int wr = cfg.window_radius;
  const auto wprof = gaussian_profile(std::max(1.0, wr / 2.0), wr);

  FlowField flow;
  // Per-pixel averaged model (A_bar, delta_b) for the current warp, then the windowed
  // normal equations sum(A^T A) d = sum(A^T db).
  Frame m11, m12, m22, q1, q2;
  for (int iter = 0; iter < cfg.iterations; ++iter) {
    for (int row = 0; row < kFrameSize; ++row) {
      for (int col = 0; col < kFrameSize; ++col) {
        const double du = std::round(flow.u(row, col));
        const double dv = std::round(flow.v(row, col));
        const int c2 = std::clamp(col + static_cast<int>(du), 0, kFrameSize - 1);
        const int r2 = std::clamp(row + static_cast<int>(dv), 0, kFrameSize - 1);

        const double a11 = 0.5 * (p1.a11(row, col) + p2.a11(r2, c2));
        const double a12 = 0.5 * (p1.a12(row, col) + p2.a12(r2, c2));
        const double a22 = 0.5 * (p1.a22(row, col) + p2.a22(r2, c2));
        const double db1 = -0.5 * (p2.b1(r2, c2) - p1.b1(row, col)) + a11 * du + a12 * dv;
        const double db2 = -0.5 * (p2.b2(r2, c2) - p1.b2(row, col)) + a12 * du + a22 * dv;

        m11(row, col) = a11 * a11 + a12 * a12;
        m12(row, col) = a11 * a12 + a12 * a22;
        m22(row, col) = a12 * a12 + a22 * a22;
        q1(row, col) = a11 * db1 + a12 * db2;
        q2(row, col) = a12 * db1 + a22 * db2;
      }
    }

    int degenerate = 0;
    for (int row = 0; row < kFrameSize; ++row) {
      for (int col = 0; col < kFrameSize; ++col) {
        double s11 = 0.0, s12 = 0.0, s22 = 0.0, t1 = 0.0, t2 = 0.0;
        for (int dy = -wr; dy <= wr; ++dy) {
          const int r = row + dy;
          if (r < 0 || r >= kFrameSize) continue;
          for (int dx = -wr; dx <= wr; ++dx) {
            const int c = col + dx;
            if (c < 0 || c >= kFrameSize) continue;
            const double w = wprof[static_cast<std::size_t>(dy + wr)] *
                             wprof[static_cast<std::size_t>(dx + wr)];
            s11 += w * m11(r, c);
            s12 += w * m12(r, c);
            s22 += w * m22(r, c);
            t1 += w * q1(r, c);
            t2 += w * q2(r, c);
          }
        }
        const double trace = s11 + s22;
        const double det = s11 * s22 - s12 * s12;
        if (trace <= 1e-12 || det <= 1e-12 * trace * trace) {
          flow.u(row, col) = 0.0;
          flow.v(row, col) = 0.0;
          ++degenerate;
          continue;
        }
        flow.u(row, col) = (s22 * t1 - s12 * t2) / det;
        flow.v(row, col) = (s11 * t2 - s12 * t1) / det;
      }
    }
    if (diag) diag->degenerate_pixels = degenerate;
  }
  return flow;
}

RgbImage flow_to_hsv_image(const FlowField& fl, double max_mag) {
  if (!(max_mag > 0.0)) throw std::invalid_argument("max_mag must be positive");
  RgbImage img;
  for (int row = 0; row < kFrameSize; ++row) {
    for (int col = 0; col < kFrameSize; ++col) {
      const double u = fl.u(row, col);
      const double v = fl.v(row, col);
      const double value = std::clamp(std::hypot(u, v) / max_mag, 0.0, 1.0);
      double hue = std::atan2(v, u);  // zero angle -> pure red
      if (hue < 0.0) hue += 2.0 * std::numbers::pi;
      const double hd = hue * 180.0 / std::numbers::pi;

      // HSV -> RGB with S = 1: chroma equals Value.
      const double hp = hd / 60.0;
      const double x = value * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
      double r = 0.0, g = 0.0, b = 0.0;
      switch (static_cast<int>(hp) % 6) {
        case 0: r = value; g = x; break;
        case 1: r = x; g = value; break;
        case 2: g = value; b = x; break;
        case 3: g = x; b = value; break;
        case 4: r = x; b = value; break;
        default: r = value; b = x; break;
      }
      img.at(row, col, 0) = static_cast<std::uint8_t>(std::lround(255.0 * r));
      img.at(row, col, 1) = static_cast<std::uint8_t>(std::lround(255.0 * g));
      img.at(row, col, 2) = static_cast<std::uint8_t>(std::lround(255.0 * b));
    }
  }
  return img;
}

void write_ppm(const RgbImage& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "P6\n" << kFrameSize << ' ' << kFrameSize << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::array<Frame, 2> flow_channels(const FlowField& fl, double max_mag) {
  if (!(max_mag > 0.0)) throw std::invalid_argument("max_mag must be positive");
  std::array<Frame, 2> planes = {Frame::Zero(), Frame::Zero()};
  for (int row = 0; row < kFrameSize; ++row) {
    for (int col = 0; col < kFrameSize; ++col) {
      const double u = fl.u(row, col);
      const double v = fl.v(row, col);
      const double mag = std::hypot(u, v);
      planes[0](row, col) = std::clamp(mag / max_mag, 0.0, 1.0);
      if (mag == 0.0) continue;  // direction 0 by convention
      double dir = (std::atan2(v, u) + std::numbers::pi) / (2.0 * std::numbers::pi);
      if (dir >= 1.0) dir -= 1.0;
      planes[1](row, col) = dir;
    }
  }
  return planes;
}

}  // namespace eegvid

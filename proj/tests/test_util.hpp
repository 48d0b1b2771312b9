#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "eegvid/types.hpp"

namespace testutil {

// Scratch directory removed on scope exit; unique per instantiation so suites
// can run concurrently.
class TempDir {
 public:
  TempDir() {
    std::string tpl = (std::filesystem::temp_directory_path() / "eegvid-test-XXXXXX").string();
    if (::mkdtemp(tpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline eegvid::VecD tone(double freq, double rate, int n, double amp = 1.0, double phase = 0.0) {
  eegvid::VecD x(n);
  for (int t = 0; t < n; ++t)
    x[t] = amp * std::sin(2.0 * std::numbers::pi * freq * t / rate + phase);
  return x;
}

// Amplitude of the `freq` component over x[begin, begin+len): exact for an
// integer number of periods.
inline double tone_amplitude(const eegvid::VecD& x, double freq, double rate, int begin, int len) {
  std::complex<double> acc(0.0, 0.0);
  for (int t = begin; t < begin + len; ++t) {
    const double w = 2.0 * std::numbers::pi * freq * t / rate;
    acc += x[t] * std::complex<double>(std::cos(w), -std::sin(w));
  }
  return 2.0 * std::abs(acc) / len;
}

// Two-pass (forward-backward) gain of the digital Butterworth bandpass designed
// by bilinear transform with prewarped edges: the analog magnitude law evaluated
// at the warped frequency.
inline double analytic_filtfilt_gain(double freq, double low, double high, double rate,
                                     int order) {
  const auto warp = [&](double f) { return std::tan(std::numbers::pi * f / rate); };
  const double w = warp(freq), wl = warp(low), wh = warp(high);
  const double r = (w * w - wl * wh) / (w * (wh - wl));
  const double h2 = 1.0 / (1.0 + std::pow(r * r, order));  // |H|^2, one pass squared
  return h2;                                               // filtfilt amplitude gain
}

inline double mean_power(const eegvid::VecD& x, int begin, int len) {
  double acc = 0.0;
  for (int t = begin; t < begin + len; ++t) acc += x[t] * x[t];
  return acc / len;
}

// Continuous Gaussian blob sampled at pixel coordinates (x = column, y = row).
inline eegvid::Frame gaussian_blob(double cx, double cy, double sigma, double amp = 1.0) {
  eegvid::Frame f;
  for (int r = 0; r < eegvid::kFrameSize; ++r)
    for (int c = 0; c < eegvid::kFrameSize; ++c) {
      const double dx = c - cx, dy = r - cy;
      f(r, c) = amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  return f;
}

struct RunResult {
  int exit_code;
  std::string output;  // stdout + stderr interleaved
};

inline RunResult run_command(const std::string& cmd) {
  const std::string full = cmd + " 2>&1";
  FILE* pipe = ::popen(full.c_str(), "r");
  if (pipe == nullptr) throw std::runtime_error("popen failed");
  std::string out;
  char buf[4096];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, got);
  const int status = ::pclose(pipe);
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code, out};
}

}  // namespace testutil

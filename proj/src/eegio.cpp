#include "eegvid/eegio.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

namespace eegvid {

namespace {

using nlohmann::json;

using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr char kMagic[] = "ERF1";

}  // namespace

int Recording::n_classes() const {
  int n = 0;
  for (const Trial& t : trials) n = std::max(n, t.label + 1);
  return n;
}

void validate_recording(const Recording& rec) {
  const int c = rec.layout.size();
  if (c < 3) throw std::invalid_argument("layout needs at least 3 electrodes");
  if (rec.layout.positions.size() != rec.layout.names.size())
    throw std::invalid_argument("layout name/position count mismatch");
  std::set<std::string> seen(rec.layout.names.begin(), rec.layout.names.end());
  if (static_cast<int>(seen.size()) != c) throw std::invalid_argument("duplicate electrode names");
  for (const Eigen::Vector3d& p : rec.layout.positions) {
    if (!p.allFinite() || std::abs(p.norm() - 1.0) > 1e-6)
      throw std::invalid_argument("unnormalized electrode positions");
  }
  if (!(rec.sample_rate > 0.0)) throw std::invalid_argument("sample rate must be positive");
  const int t = rec.n_samples();
  for (const Trial& trial : rec.trials) {
    if (trial.samples.rows() != c) throw std::invalid_argument("channel-count mismatch");
    if (trial.samples.cols() != t) throw std::invalid_argument("trials differ in sample count");
    if (!trial.samples.allFinite()) throw std::invalid_argument("non-finite data");
    if (trial.label < 0) throw std::invalid_argument("negative class label");
  }
}

Recording read_recording(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("malformed manifest: empty file");

  json m = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (m.is_discarded() || !m.is_object()) throw std::runtime_error("malformed manifest: not a JSON object");
  try {
    if (m.at("magic").get<std::string>() != kMagic)
      throw std::runtime_error("malformed manifest: bad magic");

    const auto channels = m.at("channels").get<std::int64_t>();
    const auto samples = m.at("samples").get<std::int64_t>();
    const auto n_trials = m.at("trials").get<std::int64_t>();
    if (channels < 0 || samples < 0 || n_trials < 0)
      throw std::runtime_error("malformed manifest: negative count");

    Recording rec;
    rec.sample_rate = m.at("rate").get<double>();
    rec.layout.names = m.at("names").get<std::vector<std::string>>();
    for (const auto& p : m.at("positions")) {
      const auto v = p.get<std::vector<double>>();
      if (v.size() != 3) throw std::runtime_error("malformed manifest: position is not a 3-vector");
      rec.layout.positions.emplace_back(v[0], v[1], v[2]);
    }
    const auto labels = m.at("labels").get<std::vector<int>>();

    if (static_cast<std::int64_t>(rec.layout.names.size()) != channels ||
        static_cast<std::int64_t>(rec.layout.positions.size()) != channels)
      throw std::runtime_error("channel-count mismatch between manifest fields");
    if (static_cast<std::int64_t>(labels.size()) != n_trials)
      throw std::runtime_error("malformed manifest: label count mismatch");

    const auto payload_start = in.tellg();
    in.seekg(0, std::ios::end);
    const std::int64_t payload_bytes = in.tellg() - payload_start;
    in.seekg(payload_start);

    const std::int64_t expected = n_trials * channels * samples * 4;
    if (payload_bytes != expected) {
      const std::int64_t per_channel = n_trials * samples * 4;
      if (per_channel > 0 && payload_bytes % per_channel == 0)
        throw std::runtime_error("channel-count mismatch: payload holds " +
                                 std::to_string(payload_bytes / per_channel) + " channels, manifest declares " +
                                 std::to_string(channels));
      throw std::runtime_error("payload size mismatch");
    }

    rec.trials.resize(n_trials);
    RowMajorF buf(channels, samples);
    for (std::int64_t i = 0; i < n_trials; ++i) {
      in.read(reinterpret_cast<char*>(buf.data()), channels * samples * 4);
      if (!in) throw std::runtime_error("payload size mismatch");
      rec.trials[i].samples = buf;
      rec.trials[i].label = labels[i];
    }

    validate_recording(rec);
    return rec;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed manifest: ") + e.what());
  }
}

void write_recording(const Recording& rec, const std::string& path) {
  validate_recording(rec);

  json m;
  m["magic"] = kMagic;
  m["channels"] = rec.n_channels();
  m["samples"] = rec.n_samples();
  m["trials"] = static_cast<std::int64_t>(rec.trials.size());
  m["rate"] = rec.sample_rate;
  m["names"] = rec.layout.names;
  json pos = json::array();
  for (const Eigen::Vector3d& p : rec.layout.positions) pos.push_back({p.x(), p.y(), p.z()});
  m["positions"] = std::move(pos);
  json labels = json::array();
  for (const Trial& t : rec.trials) labels.push_back(t.label);
  m["labels"] = std::move(labels);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << m.dump() << '\n';
  for (const Trial& t : rec.trials) {
    RowMajorF buf = t.samples;
    out.write(reinterpret_cast<const char*>(buf.data()), buf.size() * 4);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

ElectrodeLayout standard_layout_22() {
  // Diamond grid of the 22-electrode motor-imagery montage, given as
  // (lateral, anterior) offsets in 10% steps around Cz.
  struct GridPos {
    const char* name;
    int gx, gy;
  };
  static constexpr GridPos kGrid[22] = {
      {"Fz", 0, 2},    {"FC3", -2, 1}, {"FC1", -1, 1}, {"FCz", 0, 1},  {"FC2", 1, 1},
      {"FC4", 2, 1},   {"C5", -3, 0},  {"C3", -2, 0},  {"C1", -1, 0},  {"Cz", 0, 0},
      {"C2", 1, 0},    {"C4", 2, 0},   {"C6", 3, 0},   {"CP3", -2, -1},{"CP1", -1, -1},
      {"CPz", 0, -1},  {"CP2", 1, -1}, {"CP4", 2, -1}, {"P1", -1, -2}, {"Pz", 0, -2},
      {"P2", 1, -2},   {"POz", 0, -3}};

  // One 10% step along the scalp arc is 18 degrees; inverse azimuthal
  // equidistant mapping puts the grid back on the unit sphere.
  const double step = 18.0 * std::numbers::pi / 180.0;
  ElectrodeLayout layout;
  for (const GridPos& g : kGrid) {
    const double px = step * g.gx;
    const double py = step * g.gy;
    const double rho = std::hypot(px, py);
    const double theta = std::atan2(py, px);
    layout.names.emplace_back(g.name);
    layout.positions.emplace_back(std::sin(rho) * std::cos(theta), std::sin(rho) * std::sin(theta),
                                  std::cos(rho));
  }
  return layout;
}

Recording synth_recording(std::uint64_t seed, int n_classes, int trials_per_class,
                          const ElectrodeLayout& layout, double sample_rate, double duration_s,
                          const SynthOptions& opt) {
  if (n_classes < 2) throw std::invalid_argument("need at least 2 classes");
  if (trials_per_class < 1) throw std::invalid_argument("need at least 1 trial per class");
  const int n_samples = static_cast<int>(std::llround(sample_rate * duration_s));
  if (n_samples < 1) throw std::invalid_argument("duration too short");

  // Class source frequencies cycle through the rhythm bands so that the
  // classes are spectrally distinct; small offsets keep repeats apart.
  static constexpr double kBandFreqs[5] = {10.5, 22.0, 5.5, 38.0, 1.75};

  Recording rec;
  rec.layout = layout;
  rec.sample_rate = sample_rate;

  const int n_ch = layout.size();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);

  for (int k = 0; k < n_classes; ++k) {
    const double freq = kBandFreqs[k % 5] + 0.9 * (k / 5);

    // Smooth scalp gain pattern centered at a class-specific direction.
    const double az = 2.0 * std::numbers::pi * k / n_classes + 0.4;
    const Eigen::Vector3d center(std::sin(0.8) * std::cos(az), std::sin(0.8) * std::sin(az), std::cos(0.8));
    VecD gain(n_ch);
    for (int c = 0; c < n_ch; ++c) {
      const double d2 = (layout.positions[c] - center).squaredNorm();
      gain[c] = std::exp(-d2 / (2.0 * 0.5 * 0.5));
    }

    for (int j = 0; j < trials_per_class; ++j) {
      const double phase = phase_dist(rng);
      Trial trial;
      trial.label = k;
      trial.samples.resize(n_ch, n_samples);
      for (int c = 0; c < n_ch; ++c) {
        for (int t = 0; t < n_samples; ++t) {
          const double s = opt.amplitude * gain[c] *
                           std::sin(2.0 * std::numbers::pi * freq * t / sample_rate + phase);
          trial.samples(c, t) = static_cast<float>(s + opt.noise_sigma * noise(rng));
        }
      }
      rec.trials.push_back(std::move(trial));
    }
  }
  return rec;
}

}  // namespace eegvid

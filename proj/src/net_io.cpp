#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <vector>

#include "eegvid/net.hpp"

namespace eegvid {
namespace {

using json = nlohmann::json;

void write_tensor(std::ofstream& out, const Eigen::Ref<const MatF>& m) {
  // Row-major on disk; host is little-endian.
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  out.write(reinterpret_cast<const char*>(rm.data()),
            static_cast<std::streamsize>(sizeof(float)) * rm.size());
}

void read_tensor(std::ifstream& in, Eigen::Ref<MatF> m) {
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(m.rows(), m.cols());
  in.read(reinterpret_cast<char*>(rm.data()),
          static_cast<std::streamsize>(sizeof(float)) * rm.size());
  if (!in) throw std::runtime_error("truncated checkpoint");
  m = rm;
}

}  // namespace

std::string cell_name(RnnCell cell) { return cell == RnnCell::lstm ? "lstm" : "gru"; }

RnnCell cell_from_name(const std::string& name) {
  if (name == "lstm") return RnnCell::lstm;
  if (name == "gru") return RnnCell::gru;
  throw std::invalid_argument("unknown cell: " + name);
}

void save_checkpoint(const NetParamsT<float>& p, const std::string& path) {
  const NetConfig& c = p.cfg;
  json manifest = {
      {"magic", "EVNET1"},
      {"cell", cell_name(c.cell)},
      {"in_channels", c.in_channels},
      {"n_classes", c.n_classes},
      {"image", c.image},
      {"conv1_filters", c.conv1_filters},
      {"conv2_filters", c.conv2_filters},
      {"rnn_units", c.rnn_units},
      {"dense_units", c.dense_units},
      {"seed", c.seed},
      {"lr", c.lr},
      {"epochs_cnn", c.epochs_cnn},
      {"epochs_rnn", c.epochs_rnn},
      {"batch", c.batch},
      {"momentum", c.momentum},
      {"clip_norm", c.clip_norm},
  };

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << manifest.dump() << '\n';

  write_tensor(out, p.conv1.w);
  write_tensor(out, p.conv1.b);
  write_tensor(out, p.conv2.w);
  write_tensor(out, p.conv2.b);
  write_tensor(out, p.rnn1.wx);
  write_tensor(out, p.rnn1.wh);
  write_tensor(out, p.rnn1.b);
  write_tensor(out, p.rnn2.wx);
  write_tensor(out, p.rnn2.wh);
  write_tensor(out, p.rnn2.b);
  write_tensor(out, p.dense.w);
  write_tensor(out, p.dense.b);
  write_tensor(out, p.head.w);
  write_tensor(out, p.head.b);
  if (!out) throw std::runtime_error("write failed: " + path);
}

NetParamsT<float> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("missing checkpoint manifest");

  json manifest;
  try {
    manifest = json::parse(line);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed manifest: ") + e.what());
  }
  if (manifest.value("magic", "") != "EVNET1") throw std::runtime_error("bad magic");

  NetConfig c;
  c.cell = cell_from_name(manifest.at("cell").get<std::string>());
  c.in_channels = manifest.at("in_channels").get<int>();
  c.n_classes = manifest.at("n_classes").get<int>();
  c.image = manifest.at("image").get<int>();
  c.conv1_filters = manifest.at("conv1_filters").get<int>();
  c.conv2_filters = manifest.at("conv2_filters").get<int>();
  c.rnn_units = manifest.at("rnn_units").get<int>();
  c.dense_units = manifest.at("dense_units").get<int>();
  c.seed = manifest.at("seed").get<std::uint64_t>();
  c.lr = manifest.at("lr").get<double>();
  c.epochs_cnn = manifest.at("epochs_cnn").get<int>();
  c.epochs_rnn = manifest.at("epochs_rnn").get<int>();
  c.batch = manifest.at("batch").get<int>();
  c.momentum = manifest.at("momentum").get<double>();
  c.clip_norm = manifest.at("clip_norm").get<double>();

  NetParamsT<float> p = init_params<float>(c);  // shapes only; values overwritten below
  read_tensor(in, p.conv1.w);
  read_tensor(in, p.conv1.b);
  read_tensor(in, p.conv2.w);
  read_tensor(in, p.conv2.b);
  read_tensor(in, p.rnn1.wx);
  read_tensor(in, p.rnn1.wh);
  read_tensor(in, p.rnn1.b);
  read_tensor(in, p.rnn2.wx);
  read_tensor(in, p.rnn2.wh);
  read_tensor(in, p.rnn2.b);
  read_tensor(in, p.dense.w);
  read_tensor(in, p.dense.b);
  read_tensor(in, p.head.w);
  read_tensor(in, p.head.b);

  char extra;
  if (in.read(&extra, 1)) throw std::runtime_error("trailing bytes in checkpoint");
  return p;
}

}  // namespace eegvid

#include <cstring>
#include <fstream>

#include "bmt/common.hpp"
#include "bmt/io_util.hpp"
#include "bmt/train.hpp"

namespace bmt {

namespace {

constexpr char kMagic[4] = {'B', 'M', 'C', '1'};
constexpr std::uint32_t kVersion = 1;

void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(sizeof(double) * v.size()));
}

Eigen::VectorXd read_vector(std::istream& is) {
  const auto n = read_pod<std::uint32_t>(is, "checkpoint vector");
  Eigen::VectorXd v(n);
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * v.size()));
  require(static_cast<bool>(is), "truncated checkpoint vector");
  return v;
}

void write_history(std::ostream& os, const std::vector<double>& h) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(h.size()));
  os.write(reinterpret_cast<const char*>(h.data()),
           static_cast<std::streamsize>(sizeof(double) * h.size()));
}

std::vector<double> read_history(std::istream& is) {
  const auto n = read_pod<std::uint32_t>(is, "checkpoint history");
  std::vector<double> h(n);
  is.read(reinterpret_cast<char*>(h.data()),
          static_cast<std::streamsize>(sizeof(double) * h.size()));
  require(static_cast<bool>(is), "truncated checkpoint history");
  return h;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  atomic_write_file(path, [&](std::ostream& os) {
    os.write(kMagic, 4);
    write_pod<std::uint32_t>(os, kVersion);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.params.variant));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.params.layers.size()));
    write_pod<std::int32_t>(os, ckpt.params.bottleneck);
    for (const auto& layer : ckpt.params.layers) {
      write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(layer.w.rows()));
      write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(layer.w.cols()));
      write_pod<std::uint8_t>(os, layer.activated ? 1 : 0);
    }
    write_vector(os, ckpt.mean);
    write_vector(os, ckpt.stdev);

    const TrainConfig& c = ckpt.config;
    write_pod<double>(os, c.lr);
    write_pod<double>(os, c.lr_decay);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(c.lr_decay_every));
    write_pod<double>(os, c.margin);
    write_pod<double>(os, c.lambda);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(c.batch_size));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(c.max_epochs));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(c.patience));
    write_pod<std::uint64_t>(os, c.seed);

    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.best_epoch));
    write_history(os, ckpt.train_history);
    write_history(os, ckpt.val_history);

    for (const auto& layer : ckpt.params.layers) {
      // row-major so external readers see rows of the weight matrix
      for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
        for (Eigen::Index col = 0; col < layer.w.cols(); ++col)
          write_pod<double>(os, layer.w(r, col));
      os.write(reinterpret_cast<const char*>(layer.b.data()),
               static_cast<std::streamsize>(sizeof(double) * layer.b.size()));
      write_pod<double>(os, layer.slope);
    }
  });
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), "cannot open checkpoint: " + path.string());
  char magic[4];
  is.read(magic, 4);
  require(static_cast<bool>(is) && std::memcmp(magic, kMagic, 4) == 0,
          "invalid checkpoint (bad magic): " + path.string());
  const auto version = read_pod<std::uint32_t>(is, "checkpoint header");
  require(version == kVersion, "invalid checkpoint (unsupported version): " + path.string());

  Checkpoint ckpt;
  ckpt.params.variant = static_cast<Variant>(read_pod<std::uint32_t>(is, "checkpoint header"));
  const auto n_layers = read_pod<std::uint32_t>(is, "checkpoint header");
  ckpt.params.bottleneck = read_pod<std::int32_t>(is, "checkpoint header");
  ckpt.params.layers.resize(n_layers);
  for (auto& layer : ckpt.params.layers) {
    const auto rows = read_pod<std::uint32_t>(is, "checkpoint layer");
    const auto cols = read_pod<std::uint32_t>(is, "checkpoint layer");
    layer.activated = read_pod<std::uint8_t>(is, "checkpoint layer") != 0;
    layer.w.resize(rows, cols);
    layer.b.resize(rows);
  }
  ckpt.mean = read_vector(is);
  ckpt.stdev = read_vector(is);

  TrainConfig& c = ckpt.config;
  c.lr = read_pod<double>(is, "checkpoint config");
  c.lr_decay = read_pod<double>(is, "checkpoint config");
  c.lr_decay_every = static_cast<int>(read_pod<std::uint32_t>(is, "checkpoint config"));
  c.margin = read_pod<double>(is, "checkpoint config");
  c.lambda = read_pod<double>(is, "checkpoint config");
  c.batch_size = static_cast<int>(read_pod<std::uint32_t>(is, "checkpoint config"));
  c.max_epochs = static_cast<int>(read_pod<std::uint32_t>(is, "checkpoint config"));
  c.patience = static_cast<int>(read_pod<std::uint32_t>(is, "checkpoint config"));
  c.seed = read_pod<std::uint64_t>(is, "checkpoint config");

  ckpt.best_epoch = static_cast<int>(read_pod<std::uint32_t>(is, "checkpoint header"));
  ckpt.train_history = read_history(is);
  ckpt.val_history = read_history(is);

  for (auto& layer : ckpt.params.layers) {
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
      for (Eigen::Index col = 0; col < layer.w.cols(); ++col)
        layer.w(r, col) = read_pod<double>(is, "checkpoint weights");
    is.read(reinterpret_cast<char*>(layer.b.data()),
            static_cast<std::streamsize>(sizeof(double) * layer.b.size()));
    layer.slope = read_pod<double>(is, "checkpoint weights");
    require(static_cast<bool>(is), "truncated checkpoint parameters");
  }
  return ckpt;
}

}  // namespace bmt

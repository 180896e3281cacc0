#include "bmt/feature_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bmt/common.hpp"
#include "bmt/io_util.hpp"

namespace bmt {

const char* const kFeatureFileExt = ".bmf";

namespace {
constexpr char kMagic[4] = {'B', 'M', 'F', '1'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void write_feature_file(const std::filesystem::path& path, const FrameSequence& seq) {
  atomic_write_file(path, [&](std::ostream& os) {
    os.write(kMagic, 4);
    write_pod<std::uint32_t>(os, kVersion);
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(seq.values.rows()));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(seq.values.cols()));
    write_pod<float>(os, static_cast<float>(seq.window_s));
    write_pod<float>(os, static_cast<float>(seq.shift_s));
    os.write(reinterpret_cast<const char*>(seq.values.data()),
             static_cast<std::streamsize>(sizeof(float) * seq.values.size()));
  });
}

FrameSequence read_feature_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), "cannot open feature file: " + path.string());
  char magic[4];
  is.read(magic, 4);
  require(static_cast<bool>(is) && std::memcmp(magic, kMagic, 4) == 0,
          "invalid feature file (bad magic): " + path.string());
  const auto version = read_pod<std::uint32_t>(is, "feature file header");
  require(version == kVersion, "invalid feature file (unsupported version): " + path.string());
  const auto n_frames = read_pod<std::uint32_t>(is, "feature file header");
  const auto dim = read_pod<std::uint32_t>(is, "feature file header");
  const auto window_s = read_pod<float>(is, "feature file header");
  const auto shift_s = read_pod<float>(is, "feature file header");
  require(dim > 0, "invalid feature file (zero dim): " + path.string());

  FrameSequence seq;
  seq.window_s = window_s;
  seq.shift_s = shift_s;
  seq.source_id = path.stem().string();
  seq.values.resize(n_frames, dim);
  is.read(reinterpret_cast<char*>(seq.values.data()),
          static_cast<std::streamsize>(sizeof(float) * seq.values.size()));
  require(static_cast<bool>(is), "invalid feature file (truncated data): " + path.string());
  return seq;
}

void write_feature_csv(const std::filesystem::path& path, const FrameSequence& seq,
                       const std::vector<std::string>& column_names) {
  require(static_cast<Eigen::Index>(column_names.size()) == seq.values.cols(),
          "column name count does not match feature dim");
  std::ostringstream os;
  os << "t_start_s";
  for (const auto& name : column_names) os << ',' << name;
  os << '\n';
  os.precision(9);
  for (Eigen::Index r = 0; r < seq.values.rows(); ++r) {
    os << seq.t_start(r);
    for (Eigen::Index c = 0; c < seq.values.cols(); ++c) os << ',' << seq.values(r, c);
    os << '\n';
  }
  atomic_write_text(path, os.str());
}

std::vector<FrameSequence> read_feature_dir(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), "not a directory: " + dir.string());
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == kFeatureFileExt)
      paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  require(!paths.empty(), "no feature files (*.bmf) in " + dir.string());
  std::vector<FrameSequence> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(read_feature_file(p));
  return out;
}

}  // namespace bmt

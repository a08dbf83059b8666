#include "fedtime/dataset.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace fedtime {

void Dataset::validate() const {
  if (features.rows() != static_cast<Eigen::Index>(labels.size()))
    throw ConfigError("dataset: feature rows and label count differ");
  if (num_classes < 1) throw ConfigError("dataset: num_classes must be >= 1");
  for (const int y : labels)
    if (y < 0 || y >= num_classes) throw ConfigError("dataset: label out of range");
  if (!features.allFinite()) throw ConfigError("dataset: non-finite feature value");
}

std::pair<Eigen::MatrixXd, std::vector<int>> gather(const Dataset& ds,
                                                    const std::vector<int>& indices) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(indices.size()), ds.features.cols());
  std::vector<int> y(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = ds.features.row(indices[i]);
    y[i] = ds.labels[static_cast<std::size_t>(indices[i])];
  }
  return {std::move(x), std::move(y)};
}

namespace {

constexpr char kMagic[4] = {'F', 'T', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
  // Assumes a little-endian host, as the rest of the binary formats do.
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ConfigError(std::string("dataset file truncated while reading ") + what);
  return value;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out.write(kMagic, 4);
  write_le<std::uint32_t>(out, kVersion);
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(ds.size()));
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(ds.dim()));
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(ds.num_classes));
  // Column-major feature dump, then the label column.
  for (Eigen::Index c = 0; c < ds.features.cols(); ++c)
    for (Eigen::Index r = 0; r < ds.features.rows(); ++r)
      write_le<double>(out, ds.features(r, c));
  for (const int y : ds.labels) write_le<std::int32_t>(out, static_cast<std::int32_t>(y));
  if (!out) throw ConfigError("failed writing dataset to '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open dataset file '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw ConfigError("'" + path + "': unexpected magic, not a FTDS dataset");
  const auto version = read_le<std::uint32_t>(in, "version");
  if (version != kVersion)
    throw ConfigError("'" + path + "': unsupported FTDS version " + std::to_string(version));
  const auto n = read_le<std::uint64_t>(in, "sample count");
  const auto dim = read_le<std::uint64_t>(in, "dimension");
  const auto classes = read_le<std::uint64_t>(in, "class count");
  Dataset ds;
  ds.num_classes = static_cast<int>(classes);
  ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index c = 0; c < ds.features.cols(); ++c)
    for (Eigen::Index r = 0; r < ds.features.rows(); ++r)
      ds.features(r, c) = read_le<double>(in, "feature");
  ds.labels.resize(n);
  for (auto& y : ds.labels) y = static_cast<int>(read_le<std::int32_t>(in, "label"));
  ds.validate();
  return ds;
}

}  // namespace fedtime

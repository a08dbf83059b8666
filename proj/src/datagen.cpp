#include "fedtime/datagen.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <numeric>

#include "fedtime/rng.hpp"

namespace fedtime {

namespace {

// gzread passes uncompressed files through, so one reader covers both.
std::vector<unsigned char> read_file_maybe_gz(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw ConfigError("cannot open archive file '" + path + "'");
  std::vector<unsigned char> data;
  unsigned char chunk[1 << 16];
  int got = 0;
  while ((got = gzread(f, chunk, sizeof(chunk))) > 0)
    data.insert(data.end(), chunk, chunk + got);
  const bool bad = got < 0;
  gzclose(f);
  if (bad) throw ConfigError("failed to decompress '" + path + "'");
  return data;
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t off,
                        const std::string& path) {
  if (off + 4 > buf.size()) throw ConfigError("'" + path + "': truncated header");
  return (static_cast<std::uint32_t>(buf[off]) << 24) |
         (static_cast<std::uint32_t>(buf[off + 1]) << 16) |
         (static_cast<std::uint32_t>(buf[off + 2]) << 8) |
         static_cast<std::uint32_t>(buf[off + 3]);
}

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = read_file_maybe_gz(images_path);
  const auto lab = read_file_maybe_gz(labels_path);

  const auto img_magic = read_be32(img, 0, images_path);
  if (img_magic != kImagesMagic)
    throw ConfigError("'" + images_path + "': unexpected magic " + std::to_string(img_magic) +
                      ", expected image archive");
  const auto lab_magic = read_be32(lab, 0, labels_path);
  if (lab_magic != kLabelsMagic)
    throw ConfigError("'" + labels_path + "': unexpected magic " + std::to_string(lab_magic) +
                      ", expected label archive");

  const std::uint32_t n_img = read_be32(img, 4, images_path);
  const std::uint32_t rows = read_be32(img, 8, images_path);
  const std::uint32_t cols = read_be32(img, 12, images_path);
  const std::uint32_t n_lab = read_be32(lab, 4, labels_path);
  if (n_img != n_lab)
    throw ConfigError("image count " + std::to_string(n_img) + " does not match label count " +
                      std::to_string(n_lab));
  const std::size_t dim = static_cast<std::size_t>(rows) * cols;
  if (img.size() < 16 + static_cast<std::size_t>(n_img) * dim)
    throw ConfigError("'" + images_path + "': truncated pixel data");
  if (lab.size() < 8 + n_lab)
    throw ConfigError("'" + labels_path + "': truncated label data");

  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(n_img), static_cast<Eigen::Index>(dim));
  ds.labels.resize(n_img);
  for (std::uint32_t i = 0; i < n_img; ++i) {
    const std::size_t base = 16 + static_cast<std::size_t>(i) * dim;
    for (std::size_t j = 0; j < dim; ++j)
      ds.features(i, static_cast<Eigen::Index>(j)) = img[base + j] / 255.0;
    ds.labels[i] = lab[8 + i];
  }
  int max_label = 0;
  for (const int y : ds.labels) max_label = std::max(max_label, y);
  ds.num_classes = max_label + 1;
  ds.validate();
  return ds;
}

Dataset synth_classification(int num_classes, int input_dim, int per_class, double margin,
                             std::uint64_t seed) {
  if (num_classes < 1 || input_dim < 1 || per_class < 1)
    throw ConfigError("synth_classification: all counts must be positive");
  Rng rng(seed);

  // One Gaussian cluster per class, centered margin away from the origin
  // along a random direction.
  Eigen::MatrixXd means(num_classes, input_dim);
  for (int c = 0; c < num_classes; ++c) {
    Eigen::VectorXd dir(input_dim);
    double norm2 = 0.0;
    do {
      for (int j = 0; j < input_dim; ++j) dir(j) = rng.normal();
      norm2 = dir.squaredNorm();
    } while (norm2 == 0.0);
    means.row(c) = (margin / std::sqrt(norm2)) * dir.transpose();
  }

  Dataset ds;
  ds.num_classes = num_classes;
  const int n = num_classes * per_class;
  ds.features.resize(n, input_dim);
  ds.labels.resize(static_cast<std::size_t>(n));
  int row = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (int s = 0; s < per_class; ++s, ++row) {
      for (int j = 0; j < input_dim; ++j) ds.features(row, j) = means(c, j) + rng.normal();
      ds.labels[static_cast<std::size_t>(row)] = c;
    }
  }

  // Min-max normalize each column into [0,1]; affine, so separability is kept.
  for (int j = 0; j < input_dim; ++j) {
    const double lo = ds.features.col(j).minCoeff();
    const double hi = ds.features.col(j).maxCoeff();
    if (hi > lo)
      ds.features.col(j) = (ds.features.col(j).array() - lo) / (hi - lo);
    else
      ds.features.col(j).setZero();
  }
  ds.validate();
  return ds;
}

void PartitionSpec::validate(int num_classes) const {
  if (num_servers < 1) throw ConfigError("partition: num_servers must be >= 1");
  if (labels_per_server < 1 || labels_per_server > num_classes)
    throw ConfigError("partition: labels_per_server must be in [1, num_classes]");
  std::vector<int> slow = slow_servers;
  std::sort(slow.begin(), slow.end());
  for (std::size_t i = 0; i < slow.size(); ++i) {
    if (slow[i] < 0 || slow[i] >= num_servers)
      throw ConfigError("partition: slow server index out of range");
    if (i > 0 && slow[i] == slow[i - 1])
      throw ConfigError("partition: duplicate slow server index");
  }
}

namespace {

// Deals labels without replacement until the pool is exhausted, then refills
// with a fresh shuffle.
class LabelDealer {
 public:
  LabelDealer(std::vector<int> pool, Rng& rng) : pool_(std::move(pool)), rng_(rng) { refill(); }

  int next() {
    if (queue_.empty()) refill();
    const int label = queue_.back();
    queue_.pop_back();
    return label;
  }

 private:
  void refill() {
    queue_ = pool_;
    for (std::size_t i = queue_.size(); i > 1; --i)
      std::swap(queue_[i - 1], queue_[rng_.uniform_below(i)]);
  }

  std::vector<int> pool_;
  std::vector<int> queue_;
  Rng& rng_;
};

std::vector<int> deal_distinct(LabelDealer& dealer, int count, int pool_size) {
  std::vector<int> out;
  int guard = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++guard > 64 * pool_size * (count + 1))
      throw ConfigError("partition: cannot deal distinct labels");
    const int label = dealer.next();
    if (std::find(out.begin(), out.end(), label) == out.end()) out.push_back(label);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Partition make_partition(const Dataset& ds, const PartitionSpec& spec) {
  spec.validate(ds.num_classes);
  Rng rng(spec.seed);
  const int k = spec.num_servers;
  const int classes = ds.num_classes;

  std::vector<bool> is_slow(static_cast<std::size_t>(k), false);
  for (const int s : spec.slow_servers) is_slow[static_cast<std::size_t>(s)] = true;
  std::vector<int> fast_ids, slow_ids;
  for (int s = 0; s < k; ++s) (is_slow[static_cast<std::size_t>(s)] ? slow_ids : fast_ids).push_back(s);

  std::vector<int> all_labels(static_cast<std::size_t>(classes));
  std::iota(all_labels.begin(), all_labels.end(), 0);

  Partition part;
  part.indices.resize(static_cast<std::size_t>(k));
  part.labels.resize(static_cast<std::size_t>(k));

  if (spec.unique_on_slow) {
    const int reserved = static_cast<int>(slow_ids.size()) * spec.labels_per_server;
    if (reserved > classes || (!fast_ids.empty() && reserved >= classes))
      throw ConfigError("partition: unique_on_slow needs " + std::to_string(reserved) +
                        " exclusive labels but only " + std::to_string(classes) +
                        " classes exist");
    std::vector<int> shuffled = all_labels;
    for (std::size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[rng.uniform_below(i)]);
    int cursor = 0;
    for (const int s : slow_ids) {
      std::vector<int> mine(shuffled.begin() + cursor,
                            shuffled.begin() + cursor + spec.labels_per_server);
      std::sort(mine.begin(), mine.end());
      part.labels[static_cast<std::size_t>(s)] = std::move(mine);
      cursor += spec.labels_per_server;
    }
    std::vector<int> remaining(shuffled.begin() + cursor, shuffled.end());
    if (!fast_ids.empty()) {
      if (spec.labels_per_server > static_cast<int>(remaining.size()))
        throw ConfigError("partition: not enough non-exclusive labels for the fast servers");
      LabelDealer dealer(remaining, rng);
      for (const int s : fast_ids)
        part.labels[static_cast<std::size_t>(s)] =
            deal_distinct(dealer, spec.labels_per_server, static_cast<int>(remaining.size()));
    }
  } else {
    if (!slow_ids.empty() && fast_ids.empty())
      throw ConfigError("partition: non-unique slow labels need at least one fast server");
    // Fast servers first, so slow servers can duplicate their labels.
    LabelDealer dealer(all_labels, rng);
    for (const int s : fast_ids)
      part.labels[static_cast<std::size_t>(s)] = deal_distinct(dealer, spec.labels_per_server, classes);
    std::vector<int> fast_pool;
    for (const int s : fast_ids)
      for (const int l : part.labels[static_cast<std::size_t>(s)]) fast_pool.push_back(l);
    std::sort(fast_pool.begin(), fast_pool.end());
    fast_pool.erase(std::unique(fast_pool.begin(), fast_pool.end()), fast_pool.end());
    if (!slow_ids.empty()) {
      if (spec.labels_per_server > static_cast<int>(fast_pool.size()))
        throw ConfigError("partition: fast servers cover too few labels for the slow servers");
      LabelDealer slow_dealer(fast_pool, rng);
      for (const int s : slow_ids)
        part.labels[static_cast<std::size_t>(s)] =
            deal_distinct(slow_dealer, spec.labels_per_server, static_cast<int>(fast_pool.size()));
    }
  }

  // Deal each label's samples round-robin among the servers that hold it.
  std::vector<std::vector<int>> owners(static_cast<std::size_t>(classes));
  for (int s = 0; s < k; ++s)
    for (const int l : part.labels[static_cast<std::size_t>(s)])
      owners[static_cast<std::size_t>(l)].push_back(s);
  std::vector<std::size_t> dealt(static_cast<std::size_t>(classes), 0);
  for (int i = 0; i < ds.size(); ++i) {
    const int l = ds.labels[static_cast<std::size_t>(i)];
    const auto& who = owners[static_cast<std::size_t>(l)];
    if (who.empty()) continue;  // label unassigned: sample stays out of the partition
    const int s = who[dealt[static_cast<std::size_t>(l)] % who.size()];
    ++dealt[static_cast<std::size_t>(l)];
    part.indices[static_cast<std::size_t>(s)].push_back(i);
  }
  return part;
}

std::vector<double> size_weights(const Partition& part) {
  double total = 0.0;
  for (const auto& idx : part.indices) total += static_cast<double>(idx.size());
  if (total <= 0.0) throw ConfigError("partition holds no samples");
  std::vector<double> w;
  w.reserve(part.indices.size());
  for (const auto& idx : part.indices) w.push_back(static_cast<double>(idx.size()) / total);
  return w;
}

}  // namespace fedtime

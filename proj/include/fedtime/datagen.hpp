#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedtime/dataset.hpp"

namespace fedtime {

/// Reads the standard big-endian image/label archive pair (magics 0x00000803
/// and 0x00000801). Pixel bytes are scaled by 1/255. Plain or gzip files.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Gaussian cluster per class, feature columns min-max normalized to [0,1].
/// Linearly separable when the margin is large; bit-reproducible per seed.
Dataset synth_classification(int num_classes, int input_dim, int per_class, double margin,
                             std::uint64_t seed);

/// Label-skew partitioning control, reproducing the five experiment scenarios.
struct PartitionSpec {
  int num_servers = 1;
  int labels_per_server = 1;
  bool unique_on_slow = false;       // slow-server labels appear nowhere else
  std::vector<int> slow_servers;     // indices in [0, num_servers)
  std::uint64_t seed = 0;

  void validate(int num_classes) const;
};

/// Disjoint per-server sample index lists plus the label sets behind them.
struct Partition {
  std::vector<std::vector<int>> indices;  // per server, rows of the dataset
  std::vector<std::vector<int>> labels;   // per server, assigned class labels
};

Partition make_partition(const Dataset& ds, const PartitionSpec& spec);

/// Aggregation weights proportional to per-server sample counts.
std::vector<double> size_weights(const Partition& part);

}  // namespace fedtime

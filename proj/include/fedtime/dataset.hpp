#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "fedtime/errors.hpp"

namespace fedtime {

/// Feature matrix (one row per sample, values in [0,1]) plus integer labels.
struct Dataset {
  Eigen::MatrixXd features;  // num_samples x input_dim
  std::vector<int> labels;
  int num_classes = 0;

  int size() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
  void validate() const;
};

/// Copies the given sample rows into a dense batch.
std::pair<Eigen::MatrixXd, std::vector<int>> gather(const Dataset& ds,
                                                    const std::vector<int>& indices);

/// Columnar binary serialization, header {magic "FTDS", version, N, dim, classes}.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace fedtime

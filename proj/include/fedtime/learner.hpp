#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fedtime/dataset.hpp"

namespace fedtime {

/// Multinomial logistic regression parameters: dense weight matrix plus bias.
/// Also used as the gradient value type (same shape).
struct ModelParams {
  Eigen::MatrixXd weights;  // input_dim x num_classes
  Eigen::VectorXd bias;     // num_classes

  static ModelParams zeros(int input_dim, int num_classes);

  int input_dim() const { return static_cast<int>(weights.rows()); }
  int num_classes() const { return static_cast<int>(weights.cols()); }
  bool all_finite() const;
};

/// Row-wise class logits: X * W + b.
Eigen::MatrixXd logits(const ModelParams& params, const Eigen::MatrixXd& features);

/// Mean softmax cross-entropy over the batch.
double loss(const ModelParams& params, const Eigen::MatrixXd& features,
            const std::vector<int>& labels);
double loss(const ModelParams& params, const Dataset& ds, const std::vector<int>& indices);

/// Mini-batch gradient of the mean cross-entropy, same shape as the params.
ModelParams gradient(const ModelParams& params, const Eigen::MatrixXd& features,
                     const std::vector<int>& labels);
ModelParams gradient(const ModelParams& params, const Dataset& ds,
                     const std::vector<int>& indices);

/// One SGD step: params - eta * grad.
ModelParams sgd_step(const ModelParams& params, const ModelParams& grad, double eta);

/// Fraction of argmax-correct predictions; argmax ties go to the lowest class.
double accuracy(const ModelParams& params, const Eigen::MatrixXd& features,
                const std::vector<int>& labels);
double accuracy(const ModelParams& params, const Dataset& ds,
                const std::vector<int>& indices);

/// Checkpoint format: u32 input_dim, u32 num_classes, then weights
/// (column-major) and bias as little-endian float64.
void save_model(const ModelParams& params, const std::string& path);
ModelParams load_model(const std::string& path);

/// Learning-rate schedule. `experimental` decays per coordination round,
/// `theoretical` follows eta_t = 2 / (mu (gamma + t)) per local iteration.
struct LRSchedule {
  enum class Mode { experimental, theoretical };
  Mode mode = Mode::experimental;
  double eta0 = 0.01;
  double decay = 0.995;
  double mu = 0.0;
  double gamma = 0.0;

  double at(long long step, long long round) const;
  void validate() const;
  /// Lemma precondition eta_t <= 2 eta_{t+H+tau}, probed over the first
  /// `horizon` iterations.
  bool staleness_compatible(int local_epochs, int tau, long long horizon = 10000) const;
};

/// User-supplied constants of the convergence analysis; they parameterize the
/// theoretical schedule and bound displays, never the simulator itself.
struct TheoryConstants {
  double mu = 0.0;
  double L = 0.0;
  double G2 = 0.0;
  std::vector<double> sigma2;  // per-server gradient variance

  double kappa() const { return L / mu; }
  double gamma_sync(int local_epochs) const;
  double gamma_async(int max_epochs, int tau) const;
  void validate() const;
};

}  // namespace fedtime

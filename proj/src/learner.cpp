#include "fedtime/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

namespace fedtime {

ModelParams ModelParams::zeros(int input_dim, int num_classes) {
  ModelParams p;
  p.weights = Eigen::MatrixXd::Zero(input_dim, num_classes);
  p.bias = Eigen::VectorXd::Zero(num_classes);
  return p;
}

bool ModelParams::all_finite() const {
  return weights.allFinite() && bias.allFinite();
}

Eigen::MatrixXd logits(const ModelParams& params, const Eigen::MatrixXd& features) {
  if (features.cols() != params.weights.rows())
    throw ConfigError("feature dimension does not match model input dimension");
  return (features * params.weights).rowwise() + params.bias.transpose();
}

namespace {

void check_batch(const Eigen::MatrixXd& features, const std::vector<int>& labels) {
  if (features.rows() == 0) throw ConfigError("empty batch");
  if (features.rows() != static_cast<Eigen::Index>(labels.size()))
    throw ConfigError("batch feature rows and label count differ");
}

}  // namespace

double loss(const ModelParams& params, const Eigen::MatrixXd& features,
            const std::vector<int>& labels) {
  check_batch(features, labels);
  const Eigen::MatrixXd z = logits(params, features);
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double zmax = z.row(i).maxCoeff();
    const double lse = zmax + std::log((z.row(i).array() - zmax).exp().sum());
    total += lse - z(i, labels[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(z.rows());
}

double loss(const ModelParams& params, const Dataset& ds, const std::vector<int>& indices) {
  auto [x, y] = gather(ds, indices);
  return loss(params, x, y);
}

ModelParams gradient(const ModelParams& params, const Eigen::MatrixXd& features,
                     const std::vector<int>& labels) {
  check_batch(features, labels);
  Eigen::MatrixXd p = logits(params, features);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double zmax = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - zmax).exp();
    p.row(i) /= p.row(i).sum();
    p(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(features.rows());
  ModelParams g;
  g.weights = features.transpose() * p * inv_n;
  g.bias = p.colwise().sum().transpose() * inv_n;
  return g;
}

ModelParams gradient(const ModelParams& params, const Dataset& ds,
                     const std::vector<int>& indices) {
  auto [x, y] = gather(ds, indices);
  return gradient(params, x, y);
}

ModelParams sgd_step(const ModelParams& params, const ModelParams& grad, double eta) {
  ModelParams next;
  next.weights = params.weights - eta * grad.weights;
  next.bias = params.bias - eta * grad.bias;
  return next;
}

double accuracy(const ModelParams& params, const Eigen::MatrixXd& features,
                const std::vector<int>& labels) {
  check_batch(features, labels);
  const Eigen::MatrixXd z = logits(params, features);
  long long correct = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    int best = 0;
    for (Eigen::Index c = 1; c < z.cols(); ++c)
      if (z(i, c) > z(i, best)) best = static_cast<int>(c);
    if (best == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(z.rows());
}

double accuracy(const ModelParams& params, const Dataset& ds,
                const std::vector<int>& indices) {
  auto [x, y] = gather(ds, indices);
  return accuracy(params, x, y);
}

void save_model(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  const std::uint32_t dim = static_cast<std::uint32_t>(params.input_dim());
  const std::uint32_t classes = static_cast<std::uint32_t>(params.num_classes());
  out.write(reinterpret_cast<const char*>(&dim), 4);
  out.write(reinterpret_cast<const char*>(&classes), 4);
  out.write(reinterpret_cast<const char*>(params.weights.data()),
            static_cast<std::streamsize>(sizeof(double)) * params.weights.size());
  out.write(reinterpret_cast<const char*>(params.bias.data()),
            static_cast<std::streamsize>(sizeof(double)) * params.bias.size());
  if (!out) throw ConfigError("failed writing model to '" + path + "'");
}

ModelParams load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open model file '" + path + "'");
  std::uint32_t dim = 0, classes = 0;
  in.read(reinterpret_cast<char*>(&dim), 4);
  in.read(reinterpret_cast<char*>(&classes), 4);
  if (!in) throw ConfigError("model file '" + path + "' truncated");
  ModelParams p = ModelParams::zeros(static_cast<int>(dim), static_cast<int>(classes));
  in.read(reinterpret_cast<char*>(p.weights.data()),
          static_cast<std::streamsize>(sizeof(double)) * p.weights.size());
  in.read(reinterpret_cast<char*>(p.bias.data()),
          static_cast<std::streamsize>(sizeof(double)) * p.bias.size());
  if (!in) throw ConfigError("model file '" + path + "' truncated");
  return p;
}

double LRSchedule::at(long long step, long long round) const {
  if (mode == Mode::experimental) return eta0 * std::pow(decay, static_cast<double>(round));
  return 2.0 / (mu * (gamma + static_cast<double>(step)));
}

void LRSchedule::validate() const {
  if (mode == Mode::experimental) {
    if (!(eta0 > 0.0)) throw ConfigError("schedule: eta0 must be positive");
    if (!(decay > 0.0)) throw ConfigError("schedule: decay must be positive");
  } else {
    if (!(mu > 0.0) || !(gamma > 0.0))
      throw ConfigError("schedule: theoretical mode needs positive mu and gamma");
  }
}

bool LRSchedule::staleness_compatible(int local_epochs, int tau, long long horizon) const {
  if (mode == Mode::experimental) return true;
  // eta_t <= 2 eta_{t+H+tau}  <=>  gamma + t >= H + tau, for all probed t.
  const long long shift = static_cast<long long>(local_epochs) + tau;
  for (long long t = 0; t < horizon; ++t)
    if (at(t, 0) > 2.0 * at(t + shift, 0)) return false;
  return true;
}

double TheoryConstants::gamma_sync(int local_epochs) const {
  return std::max(8.0 * kappa(), static_cast<double>(local_epochs));
}

double TheoryConstants::gamma_async(int max_epochs, int tau) const {
  return std::max(8.0 * kappa(), static_cast<double>(max_epochs + tau));
}

void TheoryConstants::validate() const {
  if (!(mu > 0.0) || !(L > 0.0) || !(G2 > 0.0))
    throw ConfigError("theory constants must be positive");
  if (kappa() < 1.0) throw ConfigError("kappa = L/mu must be >= 1");
  for (const double s : sigma2)
    if (!(s > 0.0)) throw ConfigError("sigma_k^2 must be positive");
}

}  // namespace fedtime

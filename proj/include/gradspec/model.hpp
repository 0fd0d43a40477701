#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "gradspec/dataset.hpp"

namespace gradspec {

struct Linear {
  std::size_t in = 0;
  std::size_t out = 0;
};
struct ReLU {};
struct BatchNorm {
  std::size_t features = 0;
};
using Layer = std::variant<Linear, ReLU, BatchNorm>;

inline constexpr double kBatchNormEpsilon = 1e-5;

/// A small multilayer perceptron with every parameter in one flat vector
/// theta. Linear layers store W (out x in, column-major) followed by b;
/// BatchNorm layers store gamma followed by beta. The loss is mean softmax
/// cross-entropy.
class ToyModel {
 public:
  /// He-initialised weights (sd sqrt(2 / fan_in)), zero biases, unit gains.
  ToyModel(std::vector<Layer> layers, int classes, std::uint64_t seed);
  ToyModel(std::vector<Layer> layers, int classes, Eigen::VectorXd theta);

  /// input -> [Linear -> (BatchNorm) -> ReLU]* -> Linear(classes)
  static ToyModel mlp(std::size_t input, const std::vector<std::size_t>& hidden, int classes,
                      bool batch_norm, std::uint64_t seed);

  std::size_t parameter_count() const { return static_cast<std::size_t>(theta_.size()); }
  std::size_t input_dim() const { return input_dim_; }
  int classes() const { return classes_; }
  const std::vector<Layer>& layers() const { return layers_; }
  const Eigen::VectorXd& theta() const { return theta_; }
  void set_theta(Eigen::VectorXd theta);

  bool has_batchnorm() const;
  /// BatchNorm layers normalise with stored statistics after this call.
  bool batchnorm_frozen() const { return frozen_.has_value(); }
  /// Computes per-feature statistics over the full dataset at the current
  /// theta and uses them in place of batch statistics from now on.
  void freeze_batchnorm(const ToyDataset& ds);
  void unfreeze_batchnorm() { frozen_.reset(); }

  /// Logits, classes x B, for inputs given one sample per column.
  Eigen::MatrixXd logits(const Eigen::MatrixXd& inputs) const;

  double loss(const Eigen::MatrixXd& inputs, std::span<const int> labels) const;

  struct LossGradient {
    double loss = 0.0;
    Eigen::VectorXd gradient;
  };
  /// Reverse-mode pass; BatchNorm uses training-mode batch statistics unless
  /// frozen. Throws ValidationError for a batch of 1 through unfrozen BatchNorm.
  LossGradient loss_and_gradient(const Eigen::MatrixXd& inputs, std::span<const int> labels) const;

 private:
  struct FrozenStats {
    std::vector<Eigen::VectorXd> mean;
    std::vector<Eigen::VectorXd> inv_std;
  };

  void check_layers();

  std::vector<Layer> layers_;
  std::vector<std::size_t> offsets_;  // start of each layer's parameters in theta
  int classes_;
  std::size_t input_dim_ = 0;
  Eigen::VectorXd theta_;
  std::optional<FrozenStats> frozen_;
};

/// Columns are samples `indices` of the dataset.
Eigen::MatrixXd gather_inputs(const ToyDataset& ds, std::span<const std::size_t> indices);
std::vector<int> gather_labels(const ToyDataset& ds, std::span<const std::size_t> indices);

/// Gradient of the mean cross-entropy over the given minibatch.
Eigen::VectorXd model_grad(const ToyModel& model, const ToyDataset& ds,
                           std::span<const std::size_t> batch);

double full_loss(const ToyModel& model, const ToyDataset& ds);
Eigen::VectorXd full_gradient(const ToyModel& model, const ToyDataset& ds);
double accuracy(const ToyModel& model, const ToyDataset& ds);

/// Plain minibatch SGD on a copy of the model; the only place theta moves.
/// Throws NumericalError when the loss becomes non-finite.
ToyModel pretrain(const ToyModel& model, const ToyDataset& ds, std::size_t epochs, double eta,
                  std::size_t batch, std::uint64_t seed);

using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

inline constexpr std::size_t kMaxHessianDimension = 2000;

/// Central differences of a gradient, column j = (grad(x + h e_j) -
/// grad(x - h e_j)) / 2h, without symmetrisation.
Eigen::MatrixXd hessian_fd_raw(const GradientFn& gradient, const Eigen::VectorXd& at, double h);

/// hessian_fd_raw followed by (H + H^T) / 2.
Eigen::MatrixXd hessian_fd(const GradientFn& gradient, const Eigen::VectorXd& at, double h);

/// Full-dataset Hessian at the model's theta. Refuses unfrozen BatchNorm.
Eigen::MatrixXd hessian_fd(const ToyModel& model, const ToyDataset& ds, double h);

/// L(theta) = 1/2 theta^T A theta with additive isotropic Gaussian gradient
/// noise; its Hessian is A everywhere.
struct QuadraticObjective {
  Eigen::MatrixXd A;
  double noise_sd = 1.0;

  double loss(const Eigen::VectorXd& theta) const { return 0.5 * theta.dot(A * theta); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const { return A * theta; }
};

}  // namespace gradspec

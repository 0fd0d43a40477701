#pragma once

#include <Eigen/Dense>
#include <string>

namespace gradspec {

/// Optimizer-style map applied to each recorded gradient. Stateful kinds
/// (Momentum, Adam) carry their buffers across calls in stream order.
class GradientTransform {
 public:
  enum class Kind { Identity, Clip, Momentum, Adam, WeightDecay };

  static GradientTransform identity();
  /// Rescales g to norm tau when ||g|| > tau. tau = +inf is inert.
  static GradientTransform clip(double tau);
  /// m <- beta1 m + g; emits m.
  static GradientTransform momentum(double beta1);
  /// Bias-corrected Adam direction m_hat / (sqrt(v_hat) + eps).
  static GradientTransform adam(double beta1, double beta2, double eps = 1e-8);
  /// g + lambda theta.
  static GradientTransform weight_decay(double lambda);

  /// Parses "identity", "clip:TAU", "momentum:B1", "adam:B1:B2[:EPS]",
  /// "weight-decay:L".
  static GradientTransform parse(const std::string& text);

  Kind kind() const { return kind_; }
  std::string describe() const;

  Eigen::VectorXd apply(const Eigen::VectorXd& gradient, const Eigen::VectorXd& theta);
  void reset();

 private:
  GradientTransform(Kind kind, double a, double b, double c);

  Kind kind_;
  double p1_, p2_, p3_;
  Eigen::VectorXd first_;
  Eigen::VectorXd second_;
  long steps_ = 0;
};

}  // namespace gradspec

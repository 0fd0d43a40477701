#include "gradspec/transform.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "gradspec/error.hpp"

namespace gradspec {

GradientTransform::GradientTransform(Kind kind, double a, double b, double c)
    : kind_(kind), p1_(a), p2_(b), p3_(c) {}

GradientTransform GradientTransform::identity() { return {Kind::Identity, 0, 0, 0}; }

GradientTransform GradientTransform::clip(double tau) {
  if (!(tau > 0.0)) throw ValidationError("clip threshold must be positive");
  return {Kind::Clip, tau, 0, 0};
}

GradientTransform GradientTransform::momentum(double beta1) {
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValidationError("momentum beta1 must be in [0,1)");
  return {Kind::Momentum, beta1, 0, 0};
}

GradientTransform GradientTransform::adam(double beta1, double beta2, double eps) {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("adam betas must be in [0,1)");
  }
  if (!(eps > 0.0)) throw ValidationError("adam epsilon must be positive");
  return {Kind::Adam, beta1, beta2, eps};
}

GradientTransform GradientTransform::weight_decay(double lambda) {
  if (!(lambda >= 0.0)) throw ValidationError("weight decay must be >= 0");
  return {Kind::WeightDecay, lambda, 0, 0};
}

GradientTransform GradientTransform::parse(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
  if (parts.empty()) throw ValidationError("empty transform");
  std::vector<double> args;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    try {
      args.push_back(parts[i] == "inf" ? std::numeric_limits<double>::infinity() : std::stod(parts[i]));
    } catch (const std::exception&) {
      throw ValidationError("bad transform argument '" + parts[i] + "'");
    }
  }
  const std::string& name = parts[0];
  auto want = [&](std::size_t lo, std::size_t hi) {
    if (args.size() < lo || args.size() > hi) {
      throw ValidationError("wrong number of arguments for transform '" + name + "'");
    }
  };
  if (name == "identity") { want(0, 0); return identity(); }
  if (name == "clip") { want(1, 1); return clip(args[0]); }
  if (name == "momentum") { want(1, 1); return momentum(args[0]); }
  if (name == "adam") {
    want(0, 3);
    return adam(args.size() > 0 ? args[0] : 0.9, args.size() > 1 ? args[1] : 0.999,
                args.size() > 2 ? args[2] : 1e-8);
  }
  if (name == "weight-decay") { want(1, 1); return weight_decay(args[0]); }
  throw ValidationError("unknown transform '" + name + "'");
}

std::string GradientTransform::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::Identity: os << "identity"; break;
    case Kind::Clip: os << "clip:" << p1_; break;
    case Kind::Momentum: os << "momentum:" << p1_; break;
    case Kind::Adam: os << "adam:" << p1_ << ':' << p2_ << ':' << p3_; break;
    case Kind::WeightDecay: os << "weight-decay:" << p1_; break;
  }
  return os.str();
}

void GradientTransform::reset() {
  first_.resize(0);
  second_.resize(0);
  steps_ = 0;
}

Eigen::VectorXd GradientTransform::apply(const Eigen::VectorXd& g, const Eigen::VectorXd& theta) {
  switch (kind_) {
    case Kind::Identity:
      return g;
    case Kind::Clip: {
      const double norm = g.norm();
      return norm > p1_ ? Eigen::VectorXd(g * (p1_ / norm)) : g;
    }
    case Kind::WeightDecay:
      if (theta.size() != g.size()) throw ValidationError("weight decay needs theta of length n");
      return g + p1_ * theta;
    case Kind::Momentum:
      if (first_.size() != g.size()) first_ = Eigen::VectorXd::Zero(g.size());
      first_ = p1_ * first_ + g;
      return first_;
    case Kind::Adam: {
      if (first_.size() != g.size()) {
        first_ = Eigen::VectorXd::Zero(g.size());
        second_ = Eigen::VectorXd::Zero(g.size());
      }
      ++steps_;
      first_ = p1_ * first_ + (1.0 - p1_) * g;
      second_ = p2_ * second_ + (1.0 - p2_) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(p1_, static_cast<double>(steps_));
      const double c2 = 1.0 - std::pow(p2_, static_cast<double>(steps_));
      return ((first_ / c1).array() / ((second_ / c2).array().sqrt() + p3_)).matrix();
    }
  }
  return g;
}

}  // namespace gradspec

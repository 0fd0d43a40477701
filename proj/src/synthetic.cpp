#include "gradspec/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <span>

#include "gradspec/error.hpp"

namespace gradspec {

std::vector<double> prescribed_eigenvalues(const SpectrumSpec& spec, std::size_t n) {
  std::vector<double> lambda(n, 0.0);
  if (const auto* zipf = std::get_if<ZipfSpectrum>(&spec.kind)) {
    if (!(zipf->lambda_1 > 0.0) || !(zipf->s > 0.0)) {
      throw ValidationError("Zipf spectrum needs lambda_1 > 0 and s > 0");
    }
    for (std::size_t k = 0; k < n; ++k) {
      lambda[k] = zipf->lambda_1 * std::pow(static_cast<double>(k + 1), -zipf->s);
    }
    return lambda;
  }
  const auto& values = std::get<ExplicitSpectrum>(spec.kind).values;
  if (values.size() > n) throw ValidationError("spectrum spec lists more eigenvalues than n");
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(values[k] >= 0.0)) throw ValidationError("prescribed eigenvalues must be >= 0");
    lambda[k] = values[k];
  }
  return lambda;
}

GradientHistoryMatrix gen_synthetic_gaussian(std::size_t n, std::size_t T,
                                             const SpectrumSpec& spec,
                                             const std::optional<Eigen::VectorXd>& mean,
                                             std::uint64_t seed) {
  if (n < 1 || T < 1) throw ValidationError("gen_synthetic_gaussian: n and T must be >= 1");
  if (mean && mean->size() != static_cast<Eigen::Index>(n)) {
    throw ValidationError("gen_synthetic_gaussian: mean length must equal n");
  }
  const auto lambda = prescribed_eigenvalues(spec, n);
  Rng rng(seed);
  std::normal_distribution<double> normal;
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(T);

  Eigen::VectorXd root(rows);
  for (Eigen::Index k = 0; k < rows; ++k) root[k] = std::sqrt(lambda[static_cast<std::size_t>(k)]);

  Eigen::MatrixXd xi(rows, cols);
  for (Eigen::Index t = 0; t < cols; ++t)
    for (Eigen::Index k = 0; k < rows; ++k) xi(k, t) = normal(rng);
  Eigen::MatrixXd g = root.asDiagonal() * xi;

  if (spec.rotate) {
    Eigen::MatrixXd z(rows, rows);
    for (Eigen::Index j = 0; j < rows; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) z(i, j) = normal(rng);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
    const Eigen::MatrixXd basis = qr.householderQ();
    g = (basis * g).eval();
  }
  if (mean) g.colwise() += *mean;

  nlohmann::json meta = {{"source", "gaussian"}, {"seed", seed}, {"rotate", spec.rotate}};
  if (const auto* zipf = std::get_if<ZipfSpectrum>(&spec.kind)) {
    meta["spectrum"] = {{"kind", "zipf"}, {"lambda_1", zipf->lambda_1}, {"s", zipf->s}};
  } else {
    meta["spectrum"] = {{"kind", "explicit"}};
  }
  meta["nonzero_mean"] = mean.has_value();
  return GradientHistoryMatrix(std::move(g), 0, std::move(meta));
}

double sample_symmetric_stable(double alpha, Rng& rng) {
  std::uniform_real_distribution<double> angle(-std::numbers::pi / 2.0, std::numbers::pi / 2.0);
  std::exponential_distribution<double> exponential(1.0);
  double v = angle(rng);
  // keep cos(v) strictly positive
  while (v <= -std::numbers::pi / 2.0) v = angle(rng);
  const double w = exponential(rng);
  return std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha) *
         std::pow(std::cos(v - alpha * v) / w, (1.0 - alpha) / alpha);
}

void fill_alpha_stable(std::span<double> out, double alpha, double scale, std::uint64_t seed) {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw ValidationError("alpha out of range (0, 2]");
  if (!(scale > 0.0)) throw ValidationError("alpha-stable scale must be positive");
  Rng rng(seed);
  for (double& x : out) {
    do {
      x = scale * sample_symmetric_stable(alpha, rng);
    } while (!std::isfinite(x));
  }
}

GradientHistoryMatrix gen_alpha_stable(std::size_t n, std::size_t T, double alpha, double scale,
                                       std::uint64_t seed) {
  if (n < 1 || T < 1) throw ValidationError("gen_alpha_stable: n and T must be >= 1");
  Eigen::MatrixXd g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(T));
  fill_alpha_stable(std::span<double>(g.data(), n * T), alpha, scale, seed);
  nlohmann::json meta = {
      {"source", "alpha-stable"}, {"seed", seed}, {"alpha", alpha}, {"scale", scale}};
  return GradientHistoryMatrix(std::move(g), 0, std::move(meta));
}

}  // namespace gradspec

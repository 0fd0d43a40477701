#include "gradspec/record.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gradspec/error.hpp"

namespace gradspec {

std::vector<std::size_t> draw_batch(std::size_t N, std::size_t B, bool replacement, Rng& rng) {
  if (B < 1 || B > N) throw ValidationError("batch size must be in [1, N]");
  std::vector<std::size_t> batch(B);
  if (replacement) {
    std::uniform_int_distribution<std::size_t> pick(0, N - 1);
    for (auto& i : batch) i = pick(rng);
  } else if (B == N) {
    std::iota(batch.begin(), batch.end(), std::size_t{0});
  } else {
    std::vector<std::size_t> pool(N);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < B; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, N - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    std::copy_n(pool.begin(), B, batch.begin());
  }
  std::sort(batch.begin(), batch.end());
  return batch;
}

GradientHistoryMatrix record_trace(const ToyModel& model, const ToyDataset& ds, std::size_t B,
                                   std::size_t T, bool replacement, GradientTransform transform,
                                   std::uint64_t seed) {
  validate(ds);
  if (B < 1 || B > ds.size()) throw ValidationError("record_trace: batch size must be in [1, N]");
  if (T < 1) throw ValidationError("record_trace: T must be >= 1");
  const auto n = static_cast<Eigen::Index>(model.parameter_count());
  Eigen::MatrixXd values(n, static_cast<Eigen::Index>(T));
  Rng rng(seed);
  transform.reset();
  for (std::size_t t = 0; t < T; ++t) {
    const auto batch = draw_batch(ds.size(), B, replacement, rng);
    values.col(static_cast<Eigen::Index>(t)) =
        transform.apply(model_grad(model, ds, batch), model.theta());
  }
  nlohmann::json meta = {{"source", "toy-mlp"},
                         {"seed", seed},
                         {"replacement", replacement},
                         {"transform", transform.describe()},
                         {"dataset", to_string(ds.provenance)},
                         {"samples", ds.size()},
                         {"classes", ds.classes},
                         {"label_noise", ds.noise_rate},
                         {"batchnorm", model.has_batchnorm()}};
  return GradientHistoryMatrix(std::move(values), B, std::move(meta));
}

GradientHistoryMatrix record_quadratic_trace(const QuadraticObjective& objective,
                                             const Eigen::VectorXd& theta, std::size_t B,
                                             std::size_t T, std::uint64_t seed) {
  if (B < 1 || T < 1) throw ValidationError("record_quadratic_trace: B and T must be >= 1");
  if (objective.A.rows() != theta.size() || objective.A.cols() != theta.size()) {
    throw ValidationError("record_quadratic_trace: A must be n x n");
  }
  const Eigen::VectorXd mean = objective.gradient(theta);
  const double sd = objective.noise_sd / std::sqrt(static_cast<double>(B));
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd values(theta.size(), static_cast<Eigen::Index>(T));
  for (Eigen::Index t = 0; t < values.cols(); ++t)
    for (Eigen::Index i = 0; i < values.rows(); ++i) values(i, t) = mean[i] + sd * normal(rng);
  nlohmann::json meta = {{"source", "quadratic"}, {"seed", seed}, {"noise_sd", objective.noise_sd}};
  return GradientHistoryMatrix(std::move(values), B, std::move(meta));
}

}  // namespace gradspec

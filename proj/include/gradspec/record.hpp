#pragma once

#include <cstdint>
#include <vector>

#include "gradspec/dataset.hpp"
#include "gradspec/model.hpp"
#include "gradspec/random.hpp"
#include "gradspec/trace.hpp"
#include "gradspec/transform.hpp"

namespace gradspec {

/// Draws B sample indices, sorted ascending so that a batch is a set: with
/// replacement i.i.d. uniform, otherwise a uniform B-subset.
std::vector<std::size_t> draw_batch(std::size_t N, std::size_t B, bool replacement, Rng& rng);

/// T minibatch gradients at the model's fixed theta, each passed through
/// `transform`, as the columns of a trace. theta never changes.
GradientHistoryMatrix record_trace(const ToyModel& model, const ToyDataset& ds, std::size_t B,
                                   std::size_t T, bool replacement, GradientTransform transform,
                                   std::uint64_t seed);

/// T noisy gradients A theta + noise_sd * xi / sqrt(B) of a quadratic objective.
GradientHistoryMatrix record_quadratic_trace(const QuadraticObjective& objective,
                                             const Eigen::VectorXd& theta, std::size_t B,
                                             std::size_t T, std::uint64_t seed);

}  // namespace gradspec

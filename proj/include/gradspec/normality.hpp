#pragma once

#include <span>
#include <vector>

#include "gradspec/random.hpp"
#include "gradspec/trace.hpp"

namespace gradspec {

/// D'Agostino-Pearson omnibus result. p_value is the chi-square(2) survival
/// function exp(-statistic / 2).
struct NormalityResult {
  double z_skew = 0.0;
  double z_kurt = 0.0;
  double statistic = 0.0;
  double p_value = 1.0;
  bool accepted = false;
  bool untestable = false;
  std::size_t sample_size = 0;
};

/// Minimum sample sizes for the transformed moment statistics.
inline constexpr std::size_t kMinSkewSample = 8;
inline constexpr std::size_t kMinKurtSample = 20;

/// K points drawn uniformly without replacement, kept in series order; the
/// whole series when it has at most K points.
std::vector<double> subsample(std::span<const double> series, std::size_t K, Rng& rng);

/// Zero mean, unit population variance. Throws DegenerateSampleError on a
/// constant sample.
std::vector<double> standardize(std::span<const double> sample);

/// D'Agostino (1970) transformed skewness, ~N(0,1) under normality.
double skew_z(std::span<const double> sample);

/// Anscombe-Glynn (1983) transformed kurtosis, ~N(0,1) under normality.
double kurt_z(std::span<const double> sample);

/// Combines precomputed z-scores: k^2 = zs^2 + zk^2, p = exp(-k^2/2),
/// accepted iff p >= alpha.
NormalityResult omnibus(double z_skew, double z_kurt, double alpha, std::size_t sample_size);

/// subsample -> standardize -> skew_z, kurt_z -> omnibus. Degenerate samples
/// (fewer than 20 points after subsampling, zero variance) come back with
/// untestable = true and accepted = false.
NormalityResult normality_test(std::span<const double> series, std::size_t K, double alpha,
                               Rng& rng);
NormalityResult normality_test(const SliceSeries& series, std::size_t K, double alpha, Rng& rng);

}  // namespace gradspec

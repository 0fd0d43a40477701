#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "gradspec/random.hpp"
#include "gradspec/trace.hpp"

namespace gradspec {

/// lambda_k = lambda_1 * k^-s for k = 1..n.
struct ZipfSpectrum {
  double lambda_1 = 1.0;
  double s = 1.0;
};

/// Eigenvalues listed explicitly; missing trailing eigenvalues are zero.
struct ExplicitSpectrum {
  std::vector<double> values;
};

struct SpectrumSpec {
  std::variant<ZipfSpectrum, ExplicitSpectrum> kind;
  bool rotate = false;  // seeded random orthogonal basis instead of the axes
};

/// The n prescribed population eigenvalues of a spec, descending as given.
std::vector<double> prescribed_eigenvalues(const SpectrumSpec& spec, std::size_t n);

/// Columns g_t = mean + sum_k sqrt(lambda_k) xi_{k,t} u_k with xi ~ N(0,1)
/// i.i.d., so the population covariance has exactly the prescribed spectrum.
GradientHistoryMatrix gen_synthetic_gaussian(std::size_t n, std::size_t T,
                                             const SpectrumSpec& spec,
                                             const std::optional<Eigen::VectorXd>& mean,
                                             std::uint64_t seed);

/// One symmetric alpha-stable variate with unit scale (Chambers-Mallows-Stuck).
/// alpha = 2 gives N(0, 2); alpha = 1 gives a standard Cauchy.
double sample_symmetric_stable(double alpha, Rng& rng);

/// I.i.d. symmetric alpha-stable entries, multiplied by `scale`.
/// Throws ValidationError unless 0 < alpha <= 2.
GradientHistoryMatrix gen_alpha_stable(std::size_t n, std::size_t T, double alpha, double scale,
                                       std::uint64_t seed);

/// Fills `out` with i.i.d. symmetric alpha-stable draws.
void fill_alpha_stable(std::span<double> out, double alpha, double scale, std::uint64_t seed);

}  // namespace gradspec

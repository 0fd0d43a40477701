#pragma once

#include <optional>
#include <span>
#include <vector>

namespace gradspec {

/// Continuous power-law tail p(x) ~ x^-beta above lambda_min, with the
/// equivalent rank-order (Zipf) exponent s = 1 / (beta - 1).
struct PowerLawFit {
  double beta_hat = 0.0;
  double s_hat = 0.0;
  double lambda_min = 0.0;
  std::size_t K = 0;
};

/// Outcome of a goodness-of-fit test. For the KS power-law test `statistic`
/// is d_ks and `threshold_or_p` the critical value d_c; for the normality
/// test they are k^2 and the p-value.
struct TestVerdict {
  double statistic = 0.0;
  double threshold_or_p = 0.0;
  bool accepted = false;
  std::optional<PowerLawFit> fit;
  bool untestable = false;  // degenerate input, excluded from rates
  bool small_tail = false;  // fewer positive magnitudes than the requested K
  std::size_t tail_size = 0;
};

/// The min(K, #nonzero) largest magnitudes |x|, descending. Ties keep input
/// order. Throws DegenerateSampleError with fewer than two nonzero values.
std::vector<double> select_top_k(std::span<const double> values, std::size_t K);

/// MLE with lambda_min fixed to the smallest retained value:
///   beta = 1 + K / sum ln(x_i / lambda_min).
PowerLawFit mle_beta(std::span<const double> topk);

/// sup |F*(x) - F_emp(x)| where F*(x) = 1 - (lambda_min / x)^(beta - 1),
/// evaluated against both sides of every empirical-CDF step.
double ks_distance(std::span<const double> topk, const PowerLawFit& fit);

/// c(alpha) / sqrt(K), with the tabulated c(0.05) = 1.36 and the asymptotic
/// sqrt(-ln(alpha/2) / 2) elsewhere.
double ks_critical(std::size_t K, double alpha);

/// Top-K selection, MLE, KS distance and critical value; accepted iff
/// d_ks < d_c. Errors from the components propagate.
TestVerdict test_power_law(std::span<const double> values, std::size_t K, double alpha);

/// Batch variant of test_power_law: degenerate inputs and tails with fewer
/// than 10 positive magnitudes come back untestable (accepted = false)
/// instead of throwing.
TestVerdict try_test_power_law(std::span<const double> values, std::size_t K, double alpha);

struct LogLogLine {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares line of ln x_k against ln k (k = 1..K). Plot overlay only.
LogLogLine loglog_line(std::span<const double> topk);

}  // namespace gradspec

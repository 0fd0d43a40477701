#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "gradspec/normality.hpp"
#include "gradspec/powerlaw.hpp"
#include "gradspec/trace.hpp"

namespace gradspec {

/// Negative eigenvalues down to -kClampTolerance * lambda_1 are round-off and
/// get clamped to zero; anything more negative is reported as a solver fault.
inline constexpr double kClampTolerance = 1e-10;

/// Eigen-spectrum of C = (1/T) Gc Gc^T, where Gc is the trace with row means
/// removed (centered) or the raw trace (second moment).
class SpectrumResult {
 public:
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  const std::vector<double>& eigengaps() const { return eigengaps_; }
  double trace() const { return trace_; }
  std::size_t rank() const { return rank_; }
  bool centered() const { return centered_; }
  std::size_t dimension() const { return dimension_; }
  /// True when the spectrum came from the T x T Gram matrix.
  bool gram_route() const { return gram_route_; }

  /// Unit eigenvector of C for the k-th largest eigenvalue (k is 1-based
  /// rank order), first nonzero component positive. For the Gram route this
  /// is Gc v_k / sqrt(T lambda_k) and needs lambda_k > 0.
  Eigen::VectorXd eigenvector(std::size_t k) const;

  /// Builds a spectrum directly from a list of eigenvalues (sorted
  /// descending on entry), with no eigenvector access. Used for constructed
  /// spectra and for Hessian eigenvalues.
  static SpectrumResult from_eigenvalues(std::vector<double> eigenvalues, bool centered);

 private:
  friend SpectrumResult covariance_spectrum(const GradientHistoryMatrix&, bool);
  friend SpectrumResult symmetric_spectrum(const Eigen::MatrixXd&, bool);

  std::vector<double> eigenvalues_;
  std::vector<double> eigengaps_;
  double trace_ = 0.0;
  std::size_t rank_ = 0;
  bool centered_ = true;
  std::size_t dimension_ = 0;
  bool gram_route_ = false;

  // Shared so that copies of a result stay cheap.
  std::shared_ptr<const Eigen::MatrixXd> vectors_;       // columns, descending order
  std::shared_ptr<const Eigen::MatrixXd> gram_factor_;   // Gc, Gram route only
  double samples_ = 1.0;                                 // T, Gram route only
};

/// Chooses the T x T Gram route when n > T and a direct n x n decomposition
/// otherwise. Throws ValidationError for centered with T < 2 and
/// NumericalError on eigenvalues below the clamp tolerance.
SpectrumResult covariance_spectrum(const GradientHistoryMatrix& g, bool centered);

/// Spectrum of an arbitrary symmetric PSD matrix (e.g. an explicit
/// covariance), with eigenvector access.
SpectrumResult symmetric_spectrum(const Eigen::MatrixXd& matrix, bool centered = true);

/// Dense (1/T) Gc Gc^T, for callers that need the matrix itself.
/// Signed eigenvalues of a symmetric matrix, descending, without PSD clamping
/// (Hessians may be indefinite).
std::vector<double> symmetric_eigenvalues(const Eigen::MatrixXd& matrix);

Eigen::MatrixXd covariance_matrix(const GradientHistoryMatrix& g, bool centered);

/// delta_k = lambda_k - lambda_{k+1}. Throws with fewer than 2 eigenvalues.
std::vector<double> eigengaps(const std::vector<double>& eigenvalues);
std::vector<double> eigengaps(const SpectrumResult& spectrum);

/// Exact-Zipf gap lambda_k * (1 - (k/(k+1))^s), k 1-based.
double predicted_gap(double lambda_k, std::size_t k, double s);

/// Power-law gap approximation trace * Z_d^-1 * (k+1)^-(s+1), intended for
/// s close to 1. Z_d = sum_{j=1..n} j^-s.
double predicted_gap_simplified(double trace, double zipf_norm, std::size_t k, double s);

/// Z_d = sum_{j=1..n} j^-s.
double zipf_normalizer(std::size_t n, double s);

/// 2 * eps_norm / min(lambda_{k-1} - lambda_k, lambda_k - lambda_{k+1}),
/// one-sided at the ends of the spectrum. Returns +inf on a zero gap.
double davis_kahan_bound(const SpectrumResult& spectrum, std::size_t k, double eps_norm);

/// Eigenvector-robustness bound in closed form for a Zipf spectrum with s
/// near 1: 2 * eps_norm * (k+1)^(s+1) / lambda_1.
double zipf_robustness_bound(double lambda_1, std::size_t k, double s, double eps_norm);

struct RobustnessReport {
  std::size_t k = 0;
  double gap_min = 0.0;
  double op_norm = 0.0;
  double bound = 0.0;
  double empirical_sin = 0.0;
  bool violated = false;
};

/// Largest |eigenvalue| of a symmetric matrix by power iteration.
/// Throws NumericalError when the cap is reached before tolerance.
double operator_norm(const Eigen::MatrixXd& symmetric, Rng& rng, double tol = 1e-8,
                     int max_iterations = 10000);

/// Draws a symmetrised Gaussian matrix M, perturbs C to C + eps M and compares
/// the k-th eigenvectors (1-based) against the Davis-Kahan bound.
RobustnessReport perturb_and_measure(const Eigen::MatrixXd& covariance,
                                     const SpectrumResult& spectrum, std::size_t k, double eps,
                                     Rng& rng);
RobustnessReport perturb_and_measure(const GradientHistoryMatrix& g, std::size_t k, double eps,
                                     Rng& rng, bool centered = true);

/// Largest n accepted by the dense perturbation route.
inline constexpr std::size_t kMaxDenseDimension = 2000;

/// Power-law KS test on the positive eigenvalues.
TestVerdict test_spectrum_power_law(const SpectrumResult& spectrum, std::size_t K, double alpha);

}  // namespace gradspec

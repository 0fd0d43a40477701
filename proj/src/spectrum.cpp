#include "gradspec/spectrum.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gradspec/error.hpp"

namespace gradspec {

namespace {

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

struct Decomposition {
  std::vector<double> values;  // descending
  Eigen::MatrixXd vectors;     // matching columns
};

Decomposition decompose(const Eigen::MatrixXd& symmetric) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetric);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigensolver did not converge");
  }
  const Eigen::Index m = symmetric.rows();
  Decomposition d;
  d.values.resize(static_cast<std::size_t>(m));
  d.vectors.resize(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    d.values[static_cast<std::size_t>(j)] = solver.eigenvalues()[m - 1 - j];
    d.vectors.col(j) = solver.eigenvectors().col(m - 1 - j);
  }
  return d;
}

// Clamps round-off negatives to zero and returns the rank.
// zero_scale is the round-off level tolerated when the whole spectrum is
// numerically zero.
std::size_t clamp_and_rank(std::vector<double>& values, double zero_scale) {
  if (values.empty()) return 0;
  const double top = values.front();
  const double threshold = top > 0.0 ? kClampTolerance * top : zero_scale;
  for (double& v : values) {
    if (v < 0.0) {
      if (v < -threshold) {
        throw NumericalError("eigenvalue " + std::to_string(v) +
                             " below the PSD clamp tolerance");
      }
      v = 0.0;
    }
  }
  if (!(top > 0.0)) {
    std::fill(values.begin(), values.end(), 0.0);
    return 0;
  }
  return static_cast<std::size_t>(std::count_if(
      values.begin(), values.end(), [&](double v) { return v > kClampTolerance * top; }));
}

double round_off_scale(const Eigen::MatrixXd& m) {
  return std::numeric_limits<double>::epsilon() * static_cast<double>(m.rows()) *
         m.cwiseAbs().maxCoeff();
}

Eigen::MatrixXd centered_values(const GradientHistoryMatrix& g, bool centered) {
  if (!centered) return g.values();
  if (g.T() < 2) throw ValidationError("centered spectrum needs T >= 2");
  return g.values().colwise() - iteration_mean(g.values());
}

}  // namespace

Eigen::VectorXd SpectrumResult::eigenvector(std::size_t k) const {
  if (!vectors_) throw ValidationError("spectrum has no eigenvector access");
  if (k < 1 || k > eigenvalues_.size()) {
    throw ValidationError("eigenvector rank " + std::to_string(k) + " out of range");
  }
  const auto col = static_cast<Eigen::Index>(k - 1);
  if (!gram_route_) return vectors_->col(col);
  const double lambda = eigenvalues_[k - 1];
  if (!(lambda > 0.0)) {
    throw ValidationError("Gram-route eigenvector needs a positive eigenvalue");
  }
  Eigen::VectorXd u = (*gram_factor_ * vectors_->col(col)) / std::sqrt(samples_ * lambda);
  fix_sign(u);
  return u;
}

SpectrumResult SpectrumResult::from_eigenvalues(std::vector<double> eigenvalues, bool centered) {
  std::sort(eigenvalues.begin(), eigenvalues.end(), std::greater<>());
  SpectrumResult r;
  r.centered_ = centered;
  r.dimension_ = eigenvalues.size();
  r.rank_ = clamp_and_rank(eigenvalues, 0.0);
  r.trace_ = 0.0;
  for (double v : eigenvalues) r.trace_ += v;
  r.eigenvalues_ = std::move(eigenvalues);
  if (r.eigenvalues_.size() >= 2) r.eigengaps_ = gradspec::eigengaps(r.eigenvalues_);
  return r;
}

SpectrumResult symmetric_spectrum(const Eigen::MatrixXd& matrix, bool centered) {
  if (matrix.rows() != matrix.cols() || matrix.rows() == 0) {
    throw ValidationError("symmetric_spectrum: matrix must be square and nonempty");
  }
  if (!matrix.allFinite()) throw NumericalError("symmetric_spectrum: non-finite entries");
  auto d = decompose(matrix);
  for (Eigen::Index j = 0; j < d.vectors.cols(); ++j) fix_sign(d.vectors.col(j));
  SpectrumResult r;
  r.centered_ = centered;
  r.dimension_ = static_cast<std::size_t>(matrix.rows());
  r.trace_ = matrix.trace();
  r.rank_ = clamp_and_rank(d.values, round_off_scale(matrix));
  r.eigenvalues_ = std::move(d.values);
  if (r.eigenvalues_.size() >= 2) r.eigengaps_ = gradspec::eigengaps(r.eigenvalues_);
  r.vectors_ = std::make_shared<const Eigen::MatrixXd>(std::move(d.vectors));
  return r;
}

std::vector<double> symmetric_eigenvalues(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() != matrix.cols() || matrix.rows() == 0) {
    throw ValidationError("symmetric_eigenvalues: matrix must be square and nonempty");
  }
  if (!matrix.allFinite()) throw NumericalError("symmetric_eigenvalues: non-finite entries");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolver did not converge");
  std::vector<double> values(solver.eigenvalues().data(), solver.eigenvalues().data() + matrix.rows());
  std::reverse(values.begin(), values.end());
  return values;
}

Eigen::MatrixXd covariance_matrix(const GradientHistoryMatrix& g, bool centered) {
  const Eigen::MatrixXd gc = centered_values(g, centered);
  Eigen::MatrixXd c(gc.rows(), gc.rows());
  c.setZero();
  c.selfadjointView<Eigen::Lower>().rankUpdate(gc, 1.0 / static_cast<double>(g.T()));
  return c.selfadjointView<Eigen::Lower>();
}

SpectrumResult covariance_spectrum(const GradientHistoryMatrix& g, bool centered) {
  if (g.n() <= g.T()) {
    auto r = symmetric_spectrum(covariance_matrix(g, centered), centered);
    return r;
  }
  auto gc = std::make_shared<Eigen::MatrixXd>(centered_values(g, centered));
  const double T = static_cast<double>(g.T());
  Eigen::MatrixXd gram(gc->cols(), gc->cols());
  gram.setZero();
  gram.selfadjointView<Eigen::Lower>().rankUpdate(gc->transpose(), 1.0 / T);
  gram = gram.selfadjointView<Eigen::Lower>();
  auto d = decompose(gram);
  SpectrumResult r;
  r.centered_ = centered;
  r.gram_route_ = true;
  r.dimension_ = g.n();
  r.trace_ = gc->squaredNorm() / T;
  r.rank_ = clamp_and_rank(d.values, round_off_scale(gram));
  r.eigenvalues_ = std::move(d.values);
  if (r.eigenvalues_.size() >= 2) r.eigengaps_ = gradspec::eigengaps(r.eigenvalues_);
  r.vectors_ = std::make_shared<const Eigen::MatrixXd>(std::move(d.vectors));
  r.gram_factor_ = std::move(gc);
  r.samples_ = T;
  return r;
}

std::vector<double> eigengaps(const std::vector<double>& eigenvalues) {
  if (eigenvalues.size() < 2) throw ValidationError("eigengaps: need at least 2 eigenvalues");
  std::vector<double> gaps(eigenvalues.size() - 1);
  for (std::size_t k = 0; k + 1 < eigenvalues.size(); ++k) {
    gaps[k] = eigenvalues[k] - eigenvalues[k + 1];
  }
  return gaps;
}

std::vector<double> eigengaps(const SpectrumResult& spectrum) {
  return eigengaps(spectrum.eigenvalues());
}

double predicted_gap(double lambda_k, std::size_t k, double s) {
  const double kk = static_cast<double>(k);
  return lambda_k * (1.0 - std::pow(kk / (kk + 1.0), s));
}

double predicted_gap_simplified(double trace, double zipf_norm, std::size_t k, double s) {
  return trace / zipf_norm * std::pow(static_cast<double>(k) + 1.0, -(s + 1.0));
}

double zipf_normalizer(std::size_t n, double s) {
  double z = 0.0;
  for (std::size_t j = n; j >= 1; --j) z += std::pow(static_cast<double>(j), -s);
  return z;
}

double davis_kahan_bound(const SpectrumResult& spectrum, std::size_t k, double eps_norm) {
  const auto& lam = spectrum.eigenvalues();
  if (k < 1 || k > lam.size()) throw ValidationError("davis_kahan_bound: k out of range");
  if (eps_norm < 0.0) throw ValidationError("davis_kahan_bound: eps_norm must be >= 0");
  double gap = std::numeric_limits<double>::infinity();
  if (k >= 2) gap = std::min(gap, lam[k - 2] - lam[k - 1]);
  if (k < lam.size()) gap = std::min(gap, lam[k - 1] - lam[k]);
  if (!(gap > 0.0)) return std::numeric_limits<double>::infinity();
  return 2.0 * eps_norm / gap;
}

double zipf_robustness_bound(double lambda_1, std::size_t k, double s, double eps_norm) {
  return 2.0 * eps_norm * std::pow(static_cast<double>(k) + 1.0, s + 1.0) / lambda_1;
}

double operator_norm(const Eigen::MatrixXd& symmetric, Rng& rng, double tol, int max_iterations) {
  const Eigen::Index n = symmetric.rows();
  if (n == 0 || symmetric.cols() != n) throw ValidationError("operator_norm: square matrix required");
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  v.normalize();
  double estimate = 0.0;
  // Iterating with M^2 avoids the stall when +lambda and -lambda compete.
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd w = symmetric * v;
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    Eigen::VectorXd u = symmetric * w;
    const double un = u.norm();
    if (un == 0.0) return next;
    v = u / un;
    if (std::abs(next - estimate) <= tol * next) return next;
    estimate = next;
  }
  throw NumericalError("operator_norm: power iteration did not converge");
}

RobustnessReport perturb_and_measure(const Eigen::MatrixXd& covariance,
                                     const SpectrumResult& spectrum, std::size_t k, double eps,
                                     Rng& rng) {
  const Eigen::Index n = covariance.rows();
  if (static_cast<std::size_t>(n) > kMaxDenseDimension) {
    throw ValidationError("perturb_and_measure: n exceeds the dense limit of " +
                          std::to_string(kMaxDenseDimension));
  }
  if (spectrum.gram_route() || spectrum.dimension() != static_cast<std::size_t>(n)) {
    throw ValidationError("perturb_and_measure: spectrum must be the dense spectrum of C");
  }
  if (k < 1 || k > spectrum.eigenvalues().size()) {
    throw ValidationError("perturb_and_measure: k out of range");
  }
  if (eps < 0.0) throw ValidationError("perturb_and_measure: eps must be >= 0");

  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) m(i, j) = normal(rng);
  m = (0.5 * (m + m.transpose())).eval();

  RobustnessReport report;
  report.k = k;
  report.op_norm = operator_norm(m, rng);
  const auto& lam = spectrum.eigenvalues();
  report.gap_min = std::numeric_limits<double>::infinity();
  if (k >= 2) report.gap_min = std::min(report.gap_min, lam[k - 2] - lam[k - 1]);
  if (k < lam.size()) report.gap_min = std::min(report.gap_min, lam[k - 1] - lam[k]);
  report.bound = davis_kahan_bound(spectrum, k, eps * report.op_norm);

  if (eps > 0.0) {
    const Eigen::MatrixXd perturbed = covariance + eps * m;
    const auto d = decompose(perturbed);
    const Eigen::VectorXd u = spectrum.eigenvector(k);
    const Eigen::VectorXd v = d.vectors.col(static_cast<Eigen::Index>(k - 1));
    // |sin| as the norm of the component of v orthogonal to u
    report.empirical_sin = std::min(1.0, (v - u.dot(v) * u).norm());
  }
  report.violated = report.empirical_sin > report.bound + 1e-9;
  return report;
}

RobustnessReport perturb_and_measure(const GradientHistoryMatrix& g, std::size_t k, double eps,
                                     Rng& rng, bool centered) {
  if (g.n() > kMaxDenseDimension) {
    throw ValidationError("perturb_and_measure: n exceeds the dense limit of " +
                          std::to_string(kMaxDenseDimension));
  }
  const Eigen::MatrixXd c = covariance_matrix(g, centered);
  return perturb_and_measure(c, symmetric_spectrum(c, centered), k, eps, rng);
}

TestVerdict test_spectrum_power_law(const SpectrumResult& spectrum, std::size_t K, double alpha) {
  try {
    return test_power_law(spectrum.eigenvalues(), K, alpha);
  } catch (const DegenerateSampleError&) {
  } catch (const ValidationError&) {
  }
  TestVerdict v;
  v.untestable = true;
  v.tail_size = static_cast<std::size_t>(std::count_if(
      spectrum.eigenvalues().begin(), spectrum.eigenvalues().end(), [](double x) { return x > 0.0; }));
  v.small_tail = v.tail_size < K;
  return v;
}

}  // namespace gradspec

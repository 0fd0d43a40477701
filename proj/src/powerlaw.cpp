#include "gradspec/powerlaw.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gradspec/error.hpp"

namespace gradspec {

namespace {
constexpr std::size_t kMinimumKsCritical = 5;
// Below this many positive magnitudes a slice does not enter rate tables.
constexpr std::size_t kMinimumTestableTail = 10;
}  // namespace

std::vector<double> select_top_k(std::span<const double> values, std::size_t K) {
  if (values.empty()) throw ValidationError("select_top_k: empty input");
  if (K == 0) throw ValidationError("select_top_k: K must be positive");
  std::vector<double> mags;
  mags.reserve(values.size());
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericalError("select_top_k: non-finite value");
    if (v != 0.0) mags.push_back(std::abs(v));
  }
  if (mags.size() < 2) {
    throw DegenerateSampleError("fewer than 2 positive magnitudes");
  }
  const std::size_t keep = std::min(K, mags.size());
  std::stable_sort(mags.begin(), mags.end(), std::greater<>());
  mags.resize(keep);
  return mags;
}

PowerLawFit mle_beta(std::span<const double> topk) {
  if (topk.size() < 2) throw ValidationError("mle_beta: need K >= 2");
  const double lambda_min = topk.back();
  if (!(lambda_min > 0.0)) throw ValidationError("mle_beta: values must be positive");
  double log_sum = 0.0;
  for (std::size_t i = 0; i < topk.size(); ++i) {
    if (i > 0 && topk[i] > topk[i - 1]) {
      throw ValidationError("mle_beta: input must be sorted descending");
    }
    log_sum += std::log(topk[i] / lambda_min);
  }
  if (!(log_sum > 0.0)) {
    throw DegenerateSampleError("mle_beta: all tail values equal");
  }
  const double K = static_cast<double>(topk.size());
  PowerLawFit fit;
  fit.beta_hat = 1.0 + K / log_sum;
  fit.s_hat = 1.0 / (fit.beta_hat - 1.0);
  fit.lambda_min = lambda_min;
  fit.K = topk.size();
  return fit;
}

double ks_distance(std::span<const double> topk, const PowerLawFit& fit) {
  if (topk.empty()) throw ValidationError("ks_distance: empty sample");
  if (!(fit.beta_hat > 1.0) || !(fit.lambda_min > 0.0)) {
    throw ValidationError("ks_distance: invalid fit");
  }
  const std::size_t K = topk.size();
  const double k = static_cast<double>(K);
  const double tail_exponent = fit.beta_hat - 1.0;
  double d = 0.0;
  // topk is descending, so the j-th smallest sample is topk[K - j].
  for (std::size_t j = 1; j <= K; ++j) {
    const double x = topk[K - j];
    if (x < fit.lambda_min) throw ValidationError("ks_distance: sample below lambda_min");
    const double model_cdf = 1.0 - std::pow(fit.lambda_min / x, tail_exponent);
    const double upper = static_cast<double>(j) / k;
    const double lower = static_cast<double>(j - 1) / k;
    d = std::max({d, std::abs(model_cdf - upper), std::abs(model_cdf - lower)});
  }
  return std::min(d, 1.0);
}

double ks_critical(std::size_t K, double alpha) {
  if (K < kMinimumKsCritical) {
    throw ValidationError("ks_critical: need K >= " + std::to_string(kMinimumKsCritical));
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("ks_critical: alpha must be in (0,1)");
  const double c = alpha == 0.05 ? 1.36 : std::sqrt(-std::log(alpha / 2.0) / 2.0);
  return c / std::sqrt(static_cast<double>(K));
}

TestVerdict test_power_law(std::span<const double> values, std::size_t K, double alpha) {
  const auto topk = select_top_k(values, K);
  TestVerdict v;
  v.tail_size = topk.size();
  v.small_tail = topk.size() < K;
  const PowerLawFit fit = mle_beta(topk);
  v.statistic = ks_distance(topk, fit);
  v.threshold_or_p = ks_critical(topk.size(), alpha);
  v.accepted = v.statistic < v.threshold_or_p;
  v.fit = fit;
  return v;
}

TestVerdict try_test_power_law(std::span<const double> values, std::size_t K, double alpha) {
  try {
    auto verdict = test_power_law(values, K, alpha);
    if (verdict.tail_size >= kMinimumTestableTail) return verdict;
  } catch (const DegenerateSampleError&) {
  } catch (const ValidationError&) {
    // tails shorter than the KS table supports
  }
  TestVerdict v;
  v.untestable = true;
  return v;
}

LogLogLine loglog_line(std::span<const double> topk) {
  if (topk.size() < 2) throw ValidationError("loglog_line: need at least 2 points");
  const double m = static_cast<double>(topk.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t k = 0; k < topk.size(); ++k) {
    if (!(topk[k] > 0.0)) throw ValidationError("loglog_line: values must be positive");
    sx += std::log(static_cast<double>(k + 1));
    sy += std::log(topk[k]);
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < topk.size(); ++k) {
    const double dx = std::log(static_cast<double>(k + 1)) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(topk[k]) - my);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

}  // namespace gradspec

#include "gradspec/normality.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>

#include "gradspec/error.hpp"

namespace gradspec {

namespace {

struct CentralMoments {
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
};

// Two-pass central moments. The mean is accumulated as a shift from the first
// element so that a constant sample has m2 == 0 exactly.
CentralMoments central_moments(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  double shift = 0.0;
  for (double v : x) shift += v - x.front();
  const double mean = x.front() + shift / n;
  CentralMoments m;
  for (double v : x) {
    const double d = v - mean;
    const double d2 = d * d;
    m.m2 += d2;
    m.m3 += d2 * d;
    m.m4 += d2 * d2;
  }
  m.m2 /= n;
  m.m3 /= n;
  m.m4 /= n;
  return m;
}

}  // namespace

std::vector<double> subsample(std::span<const double> series, std::size_t K, Rng& rng) {
  if (series.size() <= K) return {series.begin(), series.end()};
  std::vector<double> out;
  out.reserve(K);
  std::sample(series.begin(), series.end(), std::back_inserter(out), K, rng);
  return out;
}

std::vector<double> standardize(std::span<const double> sample) {
  if (sample.empty()) throw ValidationError("standardize: empty sample");
  const double n = static_cast<double>(sample.size());
  double shift = 0.0;
  for (double v : sample) shift += v - sample.front();
  const double mean = sample.front() + shift / n;
  double ss = 0.0;
  for (double v : sample) ss += (v - mean) * (v - mean);
  if (!(ss > 0.0)) throw DegenerateSampleError("standardize: zero variance");
  const double inv_sd = 1.0 / std::sqrt(ss / n);
  std::vector<double> out(sample.size());
  std::transform(sample.begin(), sample.end(), out.begin(),
                 [&](double v) { return (v - mean) * inv_sd; });
  return out;
}

double skew_z(std::span<const double> sample) {
  if (sample.size() < kMinSkewSample) throw ValidationError("skew_z: need at least 8 points");
  const auto m = central_moments(sample);
  if (!(m.m2 > 0.0)) throw DegenerateSampleError("skew_z: zero variance");
  const double n = static_cast<double>(sample.size());
  const double g1 = m.m3 / std::pow(m.m2, 1.5);
  const double y = g1 * std::sqrt((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0)));
  const double beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0) /
                       ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
  const double w2 = -1.0 + std::sqrt(2.0 * (beta2 - 1.0));
  const double delta = 1.0 / std::sqrt(0.5 * std::log(w2));
  const double a = std::sqrt(2.0 / (w2 - 1.0));
  return delta * std::asinh(y / a);
}

double kurt_z(std::span<const double> sample) {
  if (sample.size() < kMinKurtSample) throw ValidationError("kurt_z: need at least 20 points");
  const auto m = central_moments(sample);
  if (!(m.m2 > 0.0)) throw DegenerateSampleError("kurt_z: zero variance");
  const double n = static_cast<double>(sample.size());
  const double b2 = m.m4 / (m.m2 * m.m2);
  const double expected = 3.0 * (n - 1.0) / (n + 1.0);
  const double variance =
      24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0) * (n + 1.0) * (n + 3.0) * (n + 5.0));
  const double x = (b2 - expected) / std::sqrt(variance);
  const double r = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0)) *
                   std::sqrt(6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0)));
  const double A = 6.0 + (8.0 / r) * (2.0 / r + std::sqrt(1.0 + 4.0 / (r * r)));
  const double denom = 1.0 + x * std::sqrt(2.0 / (A - 4.0));
  if (denom == 0.0) throw NumericalError("kurt_z: singular cube-root transform");
  const double term1 = 1.0 - 2.0 / (9.0 * A);
  const double term2 = std::cbrt((1.0 - 2.0 / A) / denom);
  return (term1 - term2) / std::sqrt(2.0 / (9.0 * A));
}

NormalityResult omnibus(double z_skew, double z_kurt, double alpha, std::size_t sample_size) {
  NormalityResult r;
  r.z_skew = z_skew;
  r.z_kurt = z_kurt;
  r.statistic = z_skew * z_skew + z_kurt * z_kurt;
  r.p_value = std::exp(-r.statistic / 2.0);
  r.accepted = r.p_value >= alpha;
  r.sample_size = sample_size;
  return r;
}

NormalityResult normality_test(std::span<const double> series, std::size_t K, double alpha,
                               Rng& rng) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("normality_test: alpha must be in (0,1)");
  const auto sample = subsample(series, K, rng);
  NormalityResult degenerate;
  degenerate.untestable = true;
  degenerate.p_value = 0.0;
  degenerate.sample_size = sample.size();
  if (sample.size() < kMinKurtSample) return degenerate;
  try {
    const auto z = standardize(sample);
    return omnibus(skew_z(z), kurt_z(z), alpha, z.size());
  } catch (const NumericalError&) {
    return degenerate;
  }
}

NormalityResult normality_test(const SliceSeries& series, std::size_t K, double alpha, Rng& rng) {
  return normality_test(std::span<const double>(series.values), K, alpha, rng);
}

}  // namespace gradspec

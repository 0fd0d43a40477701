#include "gradspec/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>

#include "gradspec/error.hpp"
#include "gradspec/random.hpp"

namespace gradspec {

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = count;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
}

std::size_t resolve_workers(std::optional<std::size_t> requested) {
  if (requested) return std::max<std::size_t>(1, *requested);
  if (const char* env = std::getenv("GRADSPEC_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw ValidationError(std::string("GRADSPEC_WORKERS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

void validate(const TestSettings& s) {
  if (!(s.alpha > 0.0 && s.alpha < 1.0)) throw ValidationError("alpha must be in (0,1)");
  if (s.k_powerlaw < 20 || s.k_gauss < 20) throw ValidationError("K values must be >= 20");
  if (s.max_slices < 1) throw ValidationError("max slices must be >= 1");
}

std::uint64_t axis_tag(Axis axis) { return axis == Axis::DimensionWise ? 1 : 2; }

SliceVerdict test_slice(const SliceSeries& slice, const TestSettings& settings) {
  SliceVerdict v;
  v.index = slice.index;
  v.power_law = try_test_power_law(slice.values, settings.k_powerlaw, settings.alpha);
  Rng rng(slice_seed(settings.seed, axis_tag(slice.axis), slice.index));
  v.normality = normality_test(slice, settings.k_gauss, settings.alpha, rng);
  return v;
}

std::vector<std::size_t> selected_slices(std::size_t count, Axis axis, const TestSettings& settings) {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  if (count <= settings.slice_cap_threshold || count <= settings.max_slices) return idx;
  std::vector<std::size_t> chosen;
  chosen.reserve(settings.max_slices);
  Rng rng(slice_seed(settings.seed, axis_tag(axis), std::numeric_limits<std::uint32_t>::max()));
  std::sample(idx.begin(), idx.end(), std::back_inserter(chosen), settings.max_slices, rng);
  return chosen;
}

std::vector<SliceVerdict> test_axis(const GradientHistoryMatrix& g, Axis axis,
                                    const TestSettings& settings) {
  validate(settings);
  const std::size_t count = axis == Axis::DimensionWise ? g.T() : g.n();
  const auto slices = selected_slices(count, axis, settings);
  std::vector<SliceVerdict> out(slices.size());
  parallel_for(slices.size(), settings.workers, [&](std::size_t j) {
    const auto series = axis == Axis::DimensionWise ? g.column(slices[j]) : g.row(slices[j]);
    out[j] = test_slice(series, settings);
  });
  return out;
}

RateSummary summarize(Axis axis, const std::vector<SliceVerdict>& verdicts, std::size_t slices_total) {
  RateSummary r;
  r.axis = axis;
  r.slices_total = slices_total;
  r.slices_selected = verdicts.size();
  double dks = 0.0, dc = 0.0, p = 0.0;
  std::size_t pl_accept = 0, g_accept = 0;
  for (const auto& v : verdicts) {
    if (v.power_law.untestable) ++r.powerlaw_untestable;
    if (v.normality.untestable) ++r.gauss_untestable;
    if (v.untestable()) {
      ++r.untestable;
      continue;
    }
    ++r.tested;
    dks += v.power_law.statistic;
    dc += v.power_law.threshold_or_p;
    p += v.normality.p_value;
    pl_accept += v.power_law.accepted ? 1 : 0;
    g_accept += v.normality.accepted ? 1 : 0;
  }
  if (r.tested == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.mean_dks = r.d_c = r.mean_p = nan;
    return r;
  }
  const double t = static_cast<double>(r.tested);
  r.mean_dks = dks / t;
  r.d_c = dc / t;
  r.mean_p = p / t;
  r.powerlaw_rate = static_cast<double>(pl_accept) / t;
  r.gaussian_rate = static_cast<double>(g_accept) / t;
  return r;
}

RateSummary analyze_axis(const GradientHistoryMatrix& g, Axis axis, const TestSettings& settings) {
  const std::size_t count = axis == Axis::DimensionWise ? g.T() : g.n();
  return summarize(axis, test_axis(g, axis, settings), count);
}

}  // namespace gradspec

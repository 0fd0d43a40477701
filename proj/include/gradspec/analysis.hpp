#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "gradspec/normality.hpp"
#include "gradspec/powerlaw.hpp"
#include "gradspec/trace.hpp"

namespace gradspec {

/// Runs body(i) for i in [0, count) on `workers` threads. Each index is
/// processed exactly once; results must be written to per-index slots.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

/// Worker count from --workers, then GRADSPEC_WORKERS, then 1.
std::size_t resolve_workers(std::optional<std::size_t> requested);

struct TestSettings {
  std::size_t k_powerlaw = 1000;
  std::size_t k_gauss = 100;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  /// Axes with more slices than slice_cap_threshold are tested on a seeded
  /// subset of max_slices slices.
  std::size_t slice_cap_threshold = 20000;
  std::size_t max_slices = 5000;
};

void validate(const TestSettings& settings);

/// Axis tag used in the per-slice seed: 1 for DimensionWise, 2 for IterationWise.
std::uint64_t axis_tag(Axis axis);

struct SliceVerdict {
  std::size_t index = 0;
  TestVerdict power_law;
  NormalityResult normality;
  bool untestable() const { return power_law.untestable || normality.untestable; }
};

/// One row of the acceptance-rate table for one axis.
struct RateSummary {
  Axis axis = Axis::DimensionWise;
  std::size_t tested = 0;
  std::size_t untestable = 0;
  double mean_dks = 0.0;
  double d_c = 0.0;
  double powerlaw_rate = 0.0;
  double mean_p = 0.0;
  double gaussian_rate = 0.0;
  // detail, not part of the CSV row
  std::size_t slices_total = 0;
  std::size_t slices_selected = 0;
  std::size_t powerlaw_untestable = 0;
  std::size_t gauss_untestable = 0;
};

/// Both tests on one slice; the normality subsample uses
/// slice_seed(settings.seed, axis_tag(axis), index).
SliceVerdict test_slice(const SliceSeries& slice, const TestSettings& settings);

/// Slice indices examined along an axis after applying the slice cap.
std::vector<std::size_t> selected_slices(std::size_t count, Axis axis, const TestSettings& settings);

std::vector<SliceVerdict> test_axis(const GradientHistoryMatrix& g, Axis axis,
                                    const TestSettings& settings);

/// Means and rates over slices whose two tests were both testable; the rest
/// count as untestable. Means are NaN when nothing was tested.
RateSummary summarize(Axis axis, const std::vector<SliceVerdict>& verdicts, std::size_t slices_total);

RateSummary analyze_axis(const GradientHistoryMatrix& g, Axis axis, const TestSettings& settings);

}  // namespace gradspec

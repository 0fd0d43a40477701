#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <vector>

namespace gradspec {

/// Which way a Gradient History Matrix is sliced.
/// DimensionWise: one column, all n parameters at a single iteration.
/// IterationWise: one row, a single parameter across all T iterations.
enum class Axis { DimensionWise, IterationWise };

const char* to_string(Axis axis);

struct SliceSeries {
  Axis axis;
  std::size_t index;  // iteration for DimensionWise, parameter for IterationWise
  std::vector<double> values;
};

struct MomentEstimate {
  Eigen::VectorXd mean;
  double trace_cov = 0.0;
  bool centered = true;
};

/// The n x T matrix whose column t is the stochastic gradient recorded at
/// iteration t with the parameters held fixed. Immutable once built; all
/// entries are finite.
class GradientHistoryMatrix {
 public:
  /// Throws ValidationError on empty dimensions and NumericalError on
  /// non-finite entries.
  GradientHistoryMatrix(Eigen::MatrixXd values, std::uint64_t batch_size = 0,
                        nlohmann::json meta = nlohmann::json::object());

  std::size_t n() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t T() const { return static_cast<std::size_t>(values_.cols()); }
  /// Batch size used to record the trace, 0 when unknown.
  std::uint64_t batch_size() const { return batch_size_; }
  const nlohmann::json& meta() const { return meta_; }
  const Eigen::MatrixXd& values() const { return values_; }

  /// 0-based iteration index.
  SliceSeries column(std::size_t t) const;
  /// 0-based parameter index.
  SliceSeries row(std::size_t i) const;

 private:
  Eigen::MatrixXd values_;
  std::uint64_t batch_size_;
  nlohmann::json meta_;
};

/// Per-parameter mean over iterations. When every column is identical the
/// result equals that column exactly (the sum runs over deviations from the
/// first column).
Eigen::VectorXd iteration_mean(const Eigen::MatrixXd& values);

/// Population (1/T) moments. centered=true estimates Tr(C), otherwise
/// Tr(E[g g^T]). Throws ValidationError for centered with T < 2.
MomentEstimate estimate_moments(const GradientHistoryMatrix& g, bool centered);

/// Same, but centred on an externally supplied mean (e.g. an exact
/// full-batch gradient) instead of the iteration mean.
MomentEstimate estimate_moments(const GradientHistoryMatrix& g,
                                const Eigen::VectorXd& reference_mean);

// On-disk format, little-endian, no padding:
//   "GHMTRACE" | u32 version=1 | u64 n | u64 T | u64 B | u32 L |
//   L bytes JSON metadata | n*T f64 values, column-major
inline constexpr char kTraceMagic[8] = {'G', 'H', 'M', 'T', 'R', 'A', 'C', 'E'};
inline constexpr std::uint32_t kTraceVersion = 1;

std::vector<std::uint8_t> encode_trace(const GradientHistoryMatrix& g);
GradientHistoryMatrix decode_trace(const std::vector<std::uint8_t>& bytes);

void save_trace(const GradientHistoryMatrix& g, const std::filesystem::path& path);
GradientHistoryMatrix load_trace(const std::filesystem::path& path);

}  // namespace gradspec

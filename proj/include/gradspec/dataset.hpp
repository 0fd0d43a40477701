#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace gradspec {

enum class Provenance { Blobs, IDXFiles, RandomLabels, NoisyLabels };

const char* to_string(Provenance p);

/// N samples of dimension d stored one per row; labels are 0-based class ids.
struct ToyDataset {
  Eigen::MatrixXd inputs;  // N x d
  std::vector<int> labels;
  int classes = 0;
  Provenance provenance = Provenance::Blobs;
  double noise_rate = 0.0;  // NoisyLabels only

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(inputs.cols()); }
};

/// Throws ValidationError when shapes or labels are inconsistent.
void validate(const ToyDataset& ds);

/// c Gaussian clouds with identity covariance around class means at distance
/// `separation` from the origin along seeded random unit directions. Labels
/// are balanced (sample j has class j mod c).
ToyDataset make_blobs(int classes, std::size_t dim, std::size_t samples, double separation,
                      std::uint64_t seed);

/// Flips each label independently with probability `rate` to a uniformly
/// chosen different class.
ToyDataset corrupt_labels(const ToyDataset& ds, double rate, std::uint64_t seed);

/// Shuffles all labels, destroying the input/label relation.
ToyDataset randomize_labels(const ToyDataset& ds, std::uint64_t seed);

/// Standard big-endian IDX image (0x00000803) and label (0x00000801) files.
/// Pixels are scaled to [0,1] and then standardised per feature; constant
/// pixels become 0. Labels must lie in [0, 9].
ToyDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Writes an IDX pair; rows x cols images with one byte per pixel.
void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const std::vector<std::uint8_t>& pixels, const std::vector<std::uint8_t>& label_bytes,
               std::uint32_t rows, std::uint32_t cols);

}  // namespace gradspec

#include "gradspec/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "gradspec/error.hpp"
#include "gradspec/random.hpp"

namespace gradspec {

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Blobs: return "blobs";
    case Provenance::IDXFiles: return "idx";
    case Provenance::RandomLabels: return "random-labels";
    case Provenance::NoisyLabels: return "noisy-labels";
  }
  return "unknown";
}

void validate(const ToyDataset& ds) {
  if (ds.labels.empty()) throw ValidationError("dataset is empty");
  if (static_cast<std::size_t>(ds.inputs.rows()) != ds.labels.size()) {
    throw ValidationError("dataset has mismatched input and label counts");
  }
  if (ds.classes < 1) throw ValidationError("dataset needs at least one class");
  for (int y : ds.labels) {
    if (y < 0 || y >= ds.classes) throw ValidationError("label out of range");
  }
  if (!(ds.noise_rate >= 0.0 && ds.noise_rate <= 1.0)) {
    throw ValidationError("label noise rate outside [0,1]");
  }
}

ToyDataset make_blobs(int classes, std::size_t dim, std::size_t samples, double separation,
                      std::uint64_t seed) {
  if (classes < 2) throw ValidationError("make_blobs: need at least 2 classes");
  if (dim < 1) throw ValidationError("make_blobs: dimension must be >= 1");
  if (samples < static_cast<std::size_t>(classes)) {
    throw ValidationError("make_blobs: need at least one sample per class");
  }
  Rng rng(seed);
  std::normal_distribution<double> normal;
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd centres(classes, d);
  for (int c = 0; c < classes; ++c) {
    Eigen::VectorXd dir(d);
    do {
      for (Eigen::Index j = 0; j < d; ++j) dir[j] = normal(rng);
    } while (dir.norm() == 0.0);
    centres.row(c) = separation * dir.normalized().transpose();
  }
  ToyDataset ds;
  ds.classes = classes;
  ds.provenance = Provenance::Blobs;
  ds.inputs.resize(static_cast<Eigen::Index>(samples), d);
  ds.labels.resize(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const int y = static_cast<int>(i % static_cast<std::size_t>(classes));
    ds.labels[i] = y;
    for (Eigen::Index j = 0; j < d; ++j) {
      ds.inputs(static_cast<Eigen::Index>(i), j) = centres(y, j) + normal(rng);
    }
  }
  return ds;
}

ToyDataset corrupt_labels(const ToyDataset& ds, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ValidationError("corrupt_labels: rate outside [0,1]");
  if (ds.classes < 2) throw ValidationError("corrupt_labels: need at least 2 classes");
  ToyDataset out = ds;
  out.provenance = Provenance::NoisyLabels;
  out.noise_rate = rate;
  Rng rng(seed);
  std::uniform_real_distribution<double> unit;
  std::uniform_int_distribution<int> other(0, ds.classes - 2);
  for (int& y : out.labels) {
    if (unit(rng) < rate) {
      const int draw = other(rng);
      y = draw >= y ? draw + 1 : draw;
    }
  }
  return out;
}

ToyDataset randomize_labels(const ToyDataset& ds, std::uint64_t seed) {
  ToyDataset out = ds;
  out.provenance = Provenance::RandomLabels;
  Rng rng(seed);
  std::shuffle(out.labels.begin(), out.labels.end(), rng);
  return out;
}

namespace {

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                        const std::string& file) {
  if (bytes.size() < offset + 4) throw FormatError(file + ": truncated IDX header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

}  // namespace

ToyDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_all(images);
  const auto lab = read_all(labels);
  const std::string img_name = images.filename().string();
  const std::string lab_name = labels.filename().string();

  if (read_be32(img, 0, img_name) != kImageMagic) throw FormatError(img_name + ": bad IDX image magic");
  if (read_be32(lab, 0, lab_name) != kLabelMagic) throw FormatError(lab_name + ": bad IDX label magic");
  const std::uint64_t count = read_be32(img, 4, img_name);
  const std::uint64_t rows = read_be32(img, 8, img_name);
  const std::uint64_t cols = read_be32(img, 12, img_name);
  const std::uint64_t label_count = read_be32(lab, 4, lab_name);
  if (count != label_count) throw FormatError("IDX image and label counts differ");
  if (count == 0 || rows * cols == 0) throw FormatError(img_name + ": empty IDX image set");
  const std::uint64_t features = rows * cols;
  if (img.size() != 16 + count * features) throw FormatError(img_name + ": truncated IDX image payload");
  if (lab.size() != 8 + count) throw FormatError(lab_name + ": truncated IDX label payload");

  ToyDataset ds;
  ds.provenance = Provenance::IDXFiles;
  ds.classes = 10;
  ds.inputs.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(features));
  ds.labels.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const int y = lab[8 + i];
    if (y > 9) throw ValidationError(lab_name + ": label " + std::to_string(y) + " outside [0,9]");
    ds.labels[i] = y;
    for (std::uint64_t f = 0; f < features; ++f) {
      ds.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) =
          img[16 + i * features + f] / 255.0;
    }
  }
  for (Eigen::Index f = 0; f < ds.inputs.cols(); ++f) {
    auto col = ds.inputs.col(f);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().mean());
    if (sd > 0.0) {
      col = (col.array() - mean) / sd;
    } else {
      col.setZero();
    }
  }
  return ds;
}

void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const std::vector<std::uint8_t>& pixels, const std::vector<std::uint8_t>& label_bytes,
               std::uint32_t rows, std::uint32_t cols) {
  const std::size_t count = label_bytes.size();
  if (pixels.size() != count * rows * cols) throw ValidationError("write_idx: pixel count mismatch");
  std::vector<std::uint8_t> img;
  put_be32(img, kImageMagic);
  put_be32(img, static_cast<std::uint32_t>(count));
  put_be32(img, rows);
  put_be32(img, cols);
  img.insert(img.end(), pixels.begin(), pixels.end());
  std::vector<std::uint8_t> lab;
  put_be32(lab, kLabelMagic);
  put_be32(lab, static_cast<std::uint32_t>(count));
  lab.insert(lab.end(), label_bytes.begin(), label_bytes.end());
  write_bytes(images, img);
  write_bytes(labels, lab);
}

}  // namespace gradspec

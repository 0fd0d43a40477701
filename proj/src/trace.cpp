#include "gradspec/trace.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "gradspec/error.hpp"

namespace gradspec {

const char* to_string(Axis axis) {
  return axis == Axis::DimensionWise ? "dimension" : "iteration";
}

GradientHistoryMatrix::GradientHistoryMatrix(Eigen::MatrixXd values,
                                             std::uint64_t batch_size,
                                             nlohmann::json meta)
    : values_(std::move(values)), batch_size_(batch_size), meta_(std::move(meta)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw ValidationError("gradient history matrix needs n >= 1 and T >= 1");
  }
  if (!values_.allFinite()) {
    throw NumericalError("gradient history matrix contains non-finite entries");
  }
  if (!meta_.is_object()) {
    throw ValidationError("trace metadata must be a JSON object");
  }
}

SliceSeries GradientHistoryMatrix::column(std::size_t t) const {
  if (t >= T()) {
    throw ValidationError("iteration index " + std::to_string(t) + " out of range [0, " +
                          std::to_string(T()) + ")");
  }
  auto col = values_.col(static_cast<Eigen::Index>(t));
  return {Axis::DimensionWise, t, std::vector<double>(col.begin(), col.end())};
}

SliceSeries GradientHistoryMatrix::row(std::size_t i) const {
  if (i >= n()) {
    throw ValidationError("parameter index " + std::to_string(i) + " out of range [0, " +
                          std::to_string(n()) + ")");
  }
  auto r = values_.row(static_cast<Eigen::Index>(i));
  return {Axis::IterationWise, i, std::vector<double>(r.begin(), r.end())};
}

Eigen::VectorXd iteration_mean(const Eigen::MatrixXd& values) {
  const Eigen::VectorXd first = values.col(0);
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(values.rows());
  for (Eigen::Index t = 1; t < values.cols(); ++t) shift += values.col(t) - first;
  return first + shift / static_cast<double>(values.cols());
}

MomentEstimate estimate_moments(const GradientHistoryMatrix& g, bool centered) {
  const auto& v = g.values();
  const double T = static_cast<double>(g.T());
  if (!centered) {
    return {iteration_mean(v), v.squaredNorm() / T, false};
  }
  if (g.T() < 2) throw ValidationError("centered moments need T >= 2");
  Eigen::VectorXd mean = iteration_mean(v);
  const double trace = (v.colwise() - mean).squaredNorm() / T;
  return {std::move(mean), trace, true};
}

MomentEstimate estimate_moments(const GradientHistoryMatrix& g,
                                const Eigen::VectorXd& reference_mean) {
  if (reference_mean.size() != static_cast<Eigen::Index>(g.n())) {
    throw ValidationError("reference mean length does not match n");
  }
  const double trace =
      (g.values().colwise() - reference_mean).squaredNorm() / static_cast<double>(g.T());
  return {reference_mean, trace, true};
}

namespace {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  for (std::size_t b = 0; b < sizeof(U); ++b) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * b)));
  }
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename U>
  U get_le(const char* what) {
    need(sizeof(U), what);
    U value = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) {
      value |= static_cast<U>(bytes_[pos_ + b]) << (8 * b);
    }
    pos_ += sizeof(U);
    return value;
  }

  std::string get_string(std::size_t len, const char* what) {
    need(len, what);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
    pos_ += len;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t len, const char* what) const {
    if (remaining() < len) {
      throw FormatError(std::string("trace truncated while reading ") + what);
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_trace(const GradientHistoryMatrix& g) {
  const std::string meta = g.meta().dump();
  std::vector<std::uint8_t> out;
  out.reserve(8 + 4 + 3 * 8 + 4 + meta.size() + 8 * g.n() * g.T());
  out.resize(sizeof kTraceMagic);
  std::memcpy(out.data(), kTraceMagic, sizeof kTraceMagic);
  put_le<std::uint32_t>(out, kTraceVersion);
  put_le<std::uint64_t>(out, g.n());
  put_le<std::uint64_t>(out, g.T());
  put_le<std::uint64_t>(out, g.batch_size());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(meta.size()));
  out.insert(out.end(), meta.begin(), meta.end());
  const double* data = g.values().data();
  for (std::size_t k = 0; k < g.n() * g.T(); ++k) {
    put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(data[k]));
  }
  return out;
}

GradientHistoryMatrix decode_trace(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  if (in.get_string(8, "magic") != std::string(kTraceMagic, 8)) {
    throw FormatError("bad trace magic (expected GHMTRACE)");
  }
  const auto version = in.get_le<std::uint32_t>("version");
  if (version != kTraceVersion) {
    throw FormatError("unsupported trace version " + std::to_string(version));
  }
  const auto n = in.get_le<std::uint64_t>("n");
  const auto T = in.get_le<std::uint64_t>("T");
  const auto B = in.get_le<std::uint64_t>("B");
  const auto meta_len = in.get_le<std::uint32_t>("metadata length");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in.get_string(meta_len, "metadata"));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("trace metadata is not valid JSON: ") + e.what());
  }
  if (n == 0 || T == 0) throw FormatError("trace declares an empty matrix");
  if (n > in.remaining() / 8 / T) {
    throw FormatError("trace truncated: payload shorter than declared n*T values");
  }
  if (in.remaining() != 8 * n * T) {
    throw FormatError("trace has trailing bytes after the payload");
  }
  Eigen::MatrixXd values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(T));
  double* data = values.data();
  for (std::uint64_t k = 0; k < n * T; ++k) {
    data[k] = std::bit_cast<double>(in.get_le<std::uint64_t>("values"));
  }
  if (!values.allFinite()) throw FormatError("trace contains non-finite values");
  try {
    return GradientHistoryMatrix(std::move(values), B, std::move(meta));
  } catch (const ValidationError& e) {
    throw FormatError(e.what());
  }
}

void save_trace(const GradientHistoryMatrix& g, const std::filesystem::path& path) {
  const auto bytes = encode_trace(g);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

GradientHistoryMatrix load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_trace(bytes);
}

}  // namespace gradspec

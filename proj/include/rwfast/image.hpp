#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rwfast {

using Index = std::int64_t;

/// Grid extents, x fastest. Two or three axes.
struct Dims {
  std::vector<Index> extents;

  int ndim() const { return static_cast<int>(extents.size()); }
  Index count() const;
  Index stride(int axis) const;
  Index flat(std::span<const Index> coord) const;
  std::vector<Index> coord(Index flat_index) const;
  bool operator==(const Dims&) const = default;
};

void validate_dims(const Dims& dims);

/// Scalar image with intensities normalized to [0,1].
struct Image {
  Dims dims;
  std::vector<double> spacing;
  std::vector<double> intensities;
  // Range of the raw data before normalization.
  double raw_min = 0.0;
  double raw_max = 1.0;

  Index size() const { return dims.count(); }
  double at(Index i) const { return intensities[static_cast<std::size_t>(i)]; }
};

/// Builds an Image from raw values, rescaling them to [0,1]. A constant
/// image maps to all zeros.
Image make_image(Dims dims, std::vector<double> raw, std::vector<double> spacing = {});

inline constexpr std::uint16_t kUnlabeled = 65535;

struct LabelMap {
  Dims dims;
  std::vector<std::uint16_t> labels;

  Index size() const { return dims.count(); }
};

/// N x K row-stochastic label probabilities.
struct ProbabilityField {
  Dims dims;
  Eigen::MatrixXd values;

  Index size() const { return values.rows(); }
  int labels() const { return static_cast<int>(values.cols()); }
};

/// Per-voxel argmax; ties go to the lowest label index.
LabelMap hard_labels(const ProbabilityField& field);

/// Max |row sum - 1| over all rows.
double row_sum_deviation(const Eigen::MatrixXd& values);

// File formats. RAWJ is a `<stem>.json` header next to a `<stem>.raw`
// little-endian payload; either path may be passed.

Image load_image(const std::filesystem::path& path);
Image load_pgm(const std::filesystem::path& path);
Image load_rawj_image(const std::filesystem::path& path);

/// Writes intensities in the normalized [0,1] range.
void save_rawj_image(const Image& image, const std::filesystem::path& path);
void save_pgm(const Image& image, const std::filesystem::path& path);

void save_label_map(const LabelMap& labels, const std::filesystem::path& path);
LabelMap load_label_map(const std::filesystem::path& path);

/// Channel-interleaved f32 payload, values clamped to [0,1].
void save_probability_field(const ProbabilityField& field,
                            const std::filesystem::path& path);
ProbabilityField load_probability_field(const std::filesystem::path& path);

/// Generic RAWJ writer used by the typed savers; `channels` values per voxel,
/// interleaved.
struct RawjHeader {
  Dims dims;
  std::vector<double> spacing;
  std::string dtype;  // "f32", "u16" or "u32"
  int channels = 1;
};

std::pair<std::filesystem::path, std::filesystem::path> rawj_paths(
    const std::filesystem::path& path);
void write_rawj(const std::filesystem::path& path, const RawjHeader& header,
                std::span<const std::byte> payload);
RawjHeader read_rawj(const std::filesystem::path& path, std::vector<std::byte>& payload);

}  // namespace rwfast

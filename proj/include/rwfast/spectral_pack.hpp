#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rwfast/graph.hpp"
#include "rwfast/image.hpp"
#include "rwfast/linalg.hpp"

namespace rwfast {

using ImageHash = std::array<std::uint8_t, 32>;

/// SHA-256 over the dims and the normalized intensities.
ImageHash image_content_hash(const Image& image);
std::string to_hex(const ImageHash& hash);

/// XXH64 of `data`.
std::uint64_t xxhash64(std::span<const std::byte> data, std::uint64_t seed = 0);

inline constexpr int kDefaultMaxPackColumns = 4096;

/// Offline artifact: the m smallest eigenpairs of the normalized Laplacian of
/// one image at one beta. Vectors are held in single precision.
struct SpectralPack {
  Dims dims;
  std::vector<double> spacing;
  double beta = 0.0;
  Eigen::MatrixXf vectors;  // N x m
  Eigen::VectorXd values;   // m, ascending
  Eigen::VectorXf d_sqrt;   // N
  ImageHash image_hash{};
  // Not serialized.
  double eig_tol = 0.0;
  int requested = 0;

  Index voxels() const { return vectors.rows(); }
  int size() const { return static_cast<int>(vectors.cols()); }
  bool operator==(const SpectralPack& other) const;
};

struct PrecomputeOptions {
  int max_columns = kDefaultMaxPackColumns;
  EigOptions eig;
};

/// Eigendecomposes the normalized Laplacian of `image` at `beta`. If the
/// eigensolver stops early the pack keeps the converged prefix and
/// `requested` records the original m.
SpectralPack precompute(const Image& image, double beta, int m,
                        const PrecomputeOptions& options = {});

/// Throws FormatError when the pack violates its invariants.
void validate_pack(const SpectralPack& pack);

void save_pack(const SpectralPack& pack, const std::filesystem::path& path);
SpectralPack load_pack(const std::filesystem::path& path);

/// Packs of one image over distinct betas, ascending.
class PackSet {
 public:
  PackSet() = default;
  explicit PackSet(std::vector<std::shared_ptr<const SpectralPack>> packs);

  const std::vector<std::shared_ptr<const SpectralPack>>& packs() const { return packs_; }
  bool empty() const { return packs_.empty(); }
  std::size_t size() const { return packs_.size(); }

  /// Index of the pack nearest to `beta` in log distance; ties go to the
  /// smaller beta.
  std::size_t nearest(double beta) const;

 private:
  std::vector<std::shared_ptr<const SpectralPack>> packs_;
};

/// Column-addressable eigenbasis consumed by the online solver. Columns are
/// read in blocks so a file-backed basis never has to be fully resident.
class ColumnBasis {
 public:
  virtual ~ColumnBasis() = default;
  virtual Index rows() const = 0;
  virtual int cols() const = 0;
  /// Eigenvalues (or their stand-ins), ascending, one per column.
  virtual const Eigen::VectorXd& values() const = 0;
  /// Fills `out` (rows() x count) with columns [first, first + count).
  virtual void read_columns(int first, int count, Eigen::MatrixXd& out) const = 0;
};

/// In-memory view of a pack; the pack must outlive the view.
class PackBasis final : public ColumnBasis {
 public:
  explicit PackBasis(const SpectralPack& pack) : pack_(pack) {}
  Index rows() const override { return pack_.voxels(); }
  int cols() const override { return pack_.size(); }
  const Eigen::VectorXd& values() const override { return pack_.values; }
  void read_columns(int first, int count, Eigen::MatrixXd& out) const override;

 private:
  const SpectralPack& pack_;
};

/// Owning double-precision basis (coarsened bases, tests).
class DenseBasis final : public ColumnBasis {
 public:
  DenseBasis(Eigen::MatrixXd vectors, Eigen::VectorXd values)
      : vectors_(std::move(vectors)), values_(std::move(values)) {}
  Index rows() const override { return vectors_.rows(); }
  int cols() const override { return static_cast<int>(vectors_.cols()); }
  const Eigen::VectorXd& values() const override { return values_; }
  void read_columns(int first, int count, Eigen::MatrixXd& out) const override;
  const Eigen::MatrixXd& vectors() const { return vectors_; }

 private:
  Eigen::MatrixXd vectors_;
  Eigen::VectorXd values_;
};

/// Streams eigenvector columns straight from a pack file. The checksum is
/// verified once at open by a chunked pass over the file.
class PackFileBasis final : public ColumnBasis {
 public:
  explicit PackFileBasis(const std::filesystem::path& path);
  Index rows() const override { return n_; }
  int cols() const override { return static_cast<int>(values_.size()); }
  const Eigen::VectorXd& values() const override { return values_; }
  void read_columns(int first, int count, Eigen::MatrixXd& out) const override;

  const Dims& dims() const { return dims_; }
  double beta() const { return beta_; }
  const ImageHash& image_hash() const { return hash_; }

 private:
  std::filesystem::path path_;
  mutable std::ifstream in_;
  mutable std::mutex mutex_;
  Dims dims_;
  double beta_ = 0.0;
  Index n_ = 0;
  Eigen::VectorXd values_;
  std::uint64_t q_offset_ = 0;
  ImageHash hash_{};
};

}  // namespace rwfast

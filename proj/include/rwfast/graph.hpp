#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rwfast/image.hpp"
#include "rwfast/sparse.hpp"

namespace rwfast {

/// Lower bound on every lattice edge weight so the graph stays connected for
/// any beta.
inline constexpr double kWeightFloor = 1e-8;

/// 4-connected in 2D, 6-connected in 3D.
enum class Neighborhood { Axial };

struct WeightedLatticeGraph {
  Dims dims;
  Neighborhood neighborhood = Neighborhood::Axial;
  CsrMatrix weights;
  Eigen::VectorXd degrees;
  double beta = 0.0;

  Index size() const { return weights.rows(); }
};

/// w_xy = max(exp(-beta |J(x) - J(y)|), kWeightFloor) on axial lattice neighbors.
WeightedLatticeGraph build_graph(const Image& image, double beta,
                                 Neighborhood neighborhood = Neighborhood::Axial);

/// Flat indices of the axial lattice neighbors of `x`, ascending.
std::vector<Index> lattice_neighbors(const Dims& dims, Index x);

enum class LaplacianMode { Unnormalized, Normalized };

struct Laplacian {
  LaplacianMode mode = LaplacianMode::Normalized;
  Dims dims;  // lattice dims, or {N, 1} for non-lattice graphs
  CsrMatrix matrix;
  Eigen::VectorXd d_sqrt;  // only filled in Normalized mode

  Index size() const { return matrix.rows(); }
};

/// Laplacian of an arbitrary symmetric nonnegative adjacency with zero
/// diagonal (lattice graphs and aggregated super-vertex graphs alike).
Laplacian laplacian_from_adjacency(const CsrMatrix& weights, LaplacianMode mode);
Laplacian laplacian(const WeightedLatticeGraph& graph, LaplacianMode mode);

/// Seeded voxels with their labels; indices are kept sorted ascending.
class SeedPartition {
 public:
  SeedPartition() = default;
  /// Sorts by index; throws InvalidParam on duplicate indices and IndexError
  /// when an index is outside [0, n).
  SeedPartition(Index n, std::vector<std::pair<Index, int>> seeds);

  Index voxel_count() const { return n_; }
  Index seed_count() const { return static_cast<Index>(indices_.size()); }
  const std::vector<Index>& seed_indices() const { return indices_; }
  const std::vector<int>& seed_labels() const { return labels_; }
  /// Non-seeded voxel indices, ascending.
  const std::vector<Index>& free_indices() const { return free_; }
  /// Position of voxel x in the seeds-first ordering.
  Index permuted_position(Index x) const { return position_[static_cast<std::size_t>(x)]; }
  bool is_seed(Index x) const { return permuted_position(x) < seed_count(); }

  /// One-hot S x K matrix of seed labels.
  Eigen::MatrixXd one_hot(int k) const;

 private:
  Index n_ = 0;
  std::vector<Index> indices_;
  std::vector<int> labels_;
  std::vector<Index> free_;
  std::vector<Index> position_;
};

/// Blocks of the Laplacian under the seeds-first ordering:
/// [[seeded, coupling], [coupling^T, free]].
struct LaplacianBlocks {
  CsrMatrix seeded;    // S x S
  CsrMatrix coupling;  // S x (N - S)
  CsrMatrix free;      // (N - S) x (N - S)
};

LaplacianBlocks partition_blocks(const Laplacian& lap, const SeedPartition& seeds);

}  // namespace rwfast

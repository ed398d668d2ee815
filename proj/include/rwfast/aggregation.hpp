#pragma once

#include <filesystem>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "rwfast/graph.hpp"
#include "rwfast/image.hpp"
#include "rwfast/rw_solver.hpp"
#include "rwfast/spectral_pack.hpp"

namespace rwfast {

/// Hard clustering of the voxels into super-vertices. eta(x, y) = 1 when x
/// belongs to y; the aggregation map is eta_bar(x, y) = 1 / |y|.
struct Aggregation {
  Dims dims;
  std::vector<Index> cluster_of;  // N
  std::vector<Index> sizes;       // N_bar
  CsrMatrix super_adjacency;      // N_bar x N_bar, summed crossing weights

  Index voxels() const { return static_cast<Index>(cluster_of.size()); }
  Index clusters() const { return static_cast<Index>(sizes.size()); }
  /// Sparse N x N_bar indicator projection.
  CsrMatrix eta() const;
  /// Sparse N x N_bar column-normalized aggregation map.
  CsrMatrix eta_bar() const;
};

inline constexpr int kUnboundedRadius = std::numeric_limits<int>::max();

/// Greedy region growing in voxel index order: each unassigned voxel starts a
/// cluster that absorbs lattice neighbors within `max_radius` (Chebyshev, from
/// the starting voxel) whose prior rows are within `similarity_tol` in L1.
Aggregation build_aggregation(const ProbabilityField& priors, const WeightedLatticeGraph& graph,
                              int max_radius, double similarity_tol);

/// Delta(x) = sum over lattice neighbors x' and clusters y of
/// |eta(x, y) - eta(x', y)|.
Eigen::VectorXd delta_weights(const Aggregation& agg, const WeightedLatticeGraph& graph);

/// Normalized Laplacian of the super-vertex graph. Throws DegenerateGraph
/// when N_bar = 1.
Laplacian aggregate_laplacian(const Aggregation& agg);

enum class CoarsenVariant { Naive, Delta };

struct CoarseBasis {
  Eigen::MatrixXd vectors;      // N_bar x m', orthonormal
  Eigen::VectorXd values;       // Rayleigh quotients, ascending
  Eigen::VectorXd delta;        // N, empty for Naive
  std::vector<int> source_cols;  // base column of each kept column
  int dropped = 0;

  int size() const { return static_cast<int>(vectors.cols()); }
  DenseBasis basis() const { return DenseBasis(vectors, values); }
};

/// Aggregates the first m columns (0 = all) of `basis`, orthonormalizes with
/// Gram-Schmidt and scores each column against the aggregate Laplacian.
CoarseBasis coarsen_basis(const ColumnBasis& basis, const Aggregation& agg,
                          const WeightedLatticeGraph& graph, CoarsenVariant variant, int m = 0);

/// Cluster means of the prior rows.
Eigen::MatrixXd aggregate_priors(const Eigen::MatrixXd& priors, const Aggregation& agg);

/// U(x) = U_bar(cluster(x)).
ProbabilityField propagate(const Eigen::MatrixXd& u_bar, const Aggregation& agg);
/// U = eta U_bar for a general row-stochastic projection.
Eigen::MatrixXd propagate(const Eigen::MatrixXd& u_bar, const CsrMatrix& eta);

/// Cluster ids as a u32 RAWJ volume.
void save_cluster_map(const Aggregation& agg, const std::filesystem::path& path,
                      const std::vector<double>& spacing = {});

}  // namespace rwfast

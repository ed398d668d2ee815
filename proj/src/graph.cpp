#include "rwfast/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rwfast/errors.hpp"

namespace rwfast {

std::vector<Index> lattice_neighbors(const Dims& dims, Index x) {
  std::vector<Index> out;
  out.reserve(6);
  Index rem = x;
  Index stride = 1;
  for (int a = 0; a < dims.ndim(); ++a) {
    const Index extent = dims.extents[a];
    const Index c = rem % extent;
    rem /= extent;
    if (c > 0) out.push_back(x - stride);
    if (c + 1 < extent) out.push_back(x + stride);
    stride *= extent;
  }
  std::sort(out.begin(), out.end());
  return out;
}

WeightedLatticeGraph build_graph(const Image& image, double beta, Neighborhood neighborhood) {
  if (!(beta >= 0.0)) throw InvalidParam("beta must be >= 0, got " + std::to_string(beta));
  WeightedLatticeGraph g;
  g.dims = image.dims;
  g.neighborhood = neighborhood;
  g.beta = beta;
  const Index n = image.size();
  std::vector<CsrMatrix::Triplet> t;
  t.reserve(static_cast<std::size_t>(n) * 2 * image.dims.extents.size());
  for (Index x = 0; x < n; ++x) {
    for (Index y : lattice_neighbors(image.dims, x)) {
      const double w =
          std::max(std::exp(-beta * std::abs(image.at(x) - image.at(y))), kWeightFloor);
      t.push_back({x, y, w});
    }
  }
  g.weights = CsrMatrix::from_triplets(n, n, std::move(t));
  g.degrees = Eigen::VectorXd::Zero(n);
  const auto rp = g.weights.row_ptr();
  const auto vals = g.weights.values();
  for (Index x = 0; x < n; ++x) {
    for (Index p = rp[x]; p < rp[x + 1]; ++p) g.degrees[x] += vals[p];
  }
  return g;
}

Laplacian laplacian_from_adjacency(const CsrMatrix& weights, LaplacianMode mode) {
  const Index n = weights.rows();
  const auto rp = weights.row_ptr();
  const auto ci = weights.col_index();
  const auto vals = weights.values();
  Eigen::VectorXd degree = Eigen::VectorXd::Zero(n);
  std::vector<CsrMatrix::Triplet> t;
  t.reserve(static_cast<std::size_t>(weights.nonzeros() + n));
  for (Index x = 0; x < n; ++x) {
    for (Index p = rp[x]; p < rp[x + 1]; ++p) {
      if (ci[p] == x) continue;
      degree[x] += vals[p];
      t.push_back({x, ci[p], -vals[p]});
    }
  }
  if (n > 1 && degree.minCoeff() <= 0.0) {
    throw DegenerateGraph("graph has an isolated vertex (zero degree)");
  }
  for (Index x = 0; x < n; ++x) t.push_back({x, x, degree[x]});

  Laplacian lap;
  lap.mode = mode;
  lap.dims = Dims{{n, 1}};
  CsrMatrix l = CsrMatrix::from_triplets(n, n, std::move(t));
  if (mode == LaplacianMode::Unnormalized) {
    lap.matrix = std::move(l);
    return lap;
  }
  lap.d_sqrt = degree.cwiseSqrt();
  if (n == 1) lap.d_sqrt.setOnes();
  const Eigen::VectorXd inv = lap.d_sqrt.cwiseInverse();
  lap.matrix = l.scaled(inv, inv);
  // Exact unit diagonal (scaling leaves rounding noise).
  std::vector<CsrMatrix::Triplet> fixed;
  fixed.reserve(static_cast<std::size_t>(lap.matrix.nonzeros()));
  const auto lrp = lap.matrix.row_ptr();
  const auto lci = lap.matrix.col_index();
  const auto lv = lap.matrix.values();
  for (Index x = 0; x < n; ++x) {
    for (Index p = lrp[x]; p < lrp[x + 1]; ++p) {
      fixed.push_back({x, lci[p], lci[p] == x ? (n == 1 ? 0.0 : 1.0) : lv[p]});
    }
  }
  lap.matrix = CsrMatrix::from_triplets(n, n, std::move(fixed));
  return lap;
}

Laplacian laplacian(const WeightedLatticeGraph& graph, LaplacianMode mode) {
  Laplacian lap = laplacian_from_adjacency(graph.weights, mode);
  lap.dims = graph.dims;
  return lap;
}

SeedPartition::SeedPartition(Index n, std::vector<std::pair<Index, int>> seeds) : n_(n) {
  std::sort(seeds.begin(), seeds.end());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto [idx, label] = seeds[i];
    if (idx < 0 || idx >= n) {
      throw IndexError("seed index " + std::to_string(idx) + " outside [0, " + std::to_string(n) + ")");
    }
    if (label < 0) throw InvalidParam("seed label must be nonnegative");
    if (i > 0 && seeds[i - 1].first == idx) {
      throw InvalidParam("duplicate seed index " + std::to_string(idx));
    }
    indices_.push_back(idx);
    labels_.push_back(label);
  }
  position_.assign(static_cast<std::size_t>(n), -1);
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    position_[static_cast<std::size_t>(indices_[i])] = static_cast<Index>(i);
  }
  free_.reserve(static_cast<std::size_t>(n) - indices_.size());
  for (Index x = 0; x < n; ++x) {
    if (position_[static_cast<std::size_t>(x)] < 0) {
      position_[static_cast<std::size_t>(x)] =
          static_cast<Index>(indices_.size() + free_.size());
      free_.push_back(x);
    }
  }
}

Eigen::MatrixXd SeedPartition::one_hot(int k) const {
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(seed_count(), k);
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] >= k) {
      throw InvalidParam("seed label " + std::to_string(labels_[i]) + " >= K=" + std::to_string(k));
    }
    u(static_cast<Index>(i), labels_[i]) = 1.0;
  }
  return u;
}

LaplacianBlocks partition_blocks(const Laplacian& lap, const SeedPartition& seeds) {
  if (seeds.voxel_count() != lap.size()) {
    for (Index s : seeds.seed_indices()) {
      if (s >= lap.size()) throw IndexError("seed index out of range for Laplacian");
    }
    throw DimsMismatch("seed partition built for a different voxel count");
  }
  const auto& s = seeds.seed_indices();
  const auto& f = seeds.free_indices();
  return LaplacianBlocks{lap.matrix.select(s, s), lap.matrix.select(s, f),
                         lap.matrix.select(f, f)};
}

}  // namespace rwfast

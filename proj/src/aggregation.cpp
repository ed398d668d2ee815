#include "rwfast/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "rwfast/errors.hpp"
#include "rwfast/linalg.hpp"
#include "rwfast/refresh.hpp"

namespace rwfast {

CsrMatrix Aggregation::eta() const {
  std::vector<CsrMatrix::Triplet> t;
  t.reserve(cluster_of.size());
  for (Index x = 0; x < voxels(); ++x) t.push_back({x, cluster_of[x], 1.0});
  return CsrMatrix::from_triplets(voxels(), clusters(), std::move(t));
}

CsrMatrix Aggregation::eta_bar() const {
  std::vector<CsrMatrix::Triplet> t;
  t.reserve(cluster_of.size());
  for (Index x = 0; x < voxels(); ++x) {
    const Index y = cluster_of[x];
    t.push_back({x, y, 1.0 / static_cast<double>(sizes[y])});
  }
  return CsrMatrix::from_triplets(voxels(), clusters(), std::move(t));
}

Aggregation build_aggregation(const ProbabilityField& priors, const WeightedLatticeGraph& graph,
                              int max_radius, double similarity_tol) {
  const Index n = priors.size();
  if (graph.size() != n || !(graph.dims == priors.dims)) {
    throw DimsMismatch("aggregation: priors and graph dims differ");
  }
  if (max_radius < 0 || !(similarity_tol >= 0.0)) {
    throw InvalidParam("aggregation: radius and tolerance must be >= 0");
  }
  const Dims& dims = priors.dims;
  Aggregation agg;
  agg.dims = dims;
  agg.cluster_of.assign(static_cast<std::size_t>(n), -1);
  std::deque<Index> queue;
  for (Index start = 0; start < n; ++start) {
    if (agg.cluster_of[start] >= 0) continue;
    const Index id = agg.clusters();
    const std::vector<Index> origin = dims.coord(start);
    agg.cluster_of[start] = id;
    Index size = 1;
    queue.assign(1, start);
    while (!queue.empty()) {
      const Index x = queue.front();
      queue.pop_front();
      for (Index y : lattice_neighbors(dims, x)) {
        if (agg.cluster_of[y] >= 0) continue;
        const std::vector<Index> c = dims.coord(y);
        Index cheb = 0;
        for (int a = 0; a < dims.ndim(); ++a) cheb = std::max(cheb, std::abs(c[a] - origin[a]));
        if (cheb > max_radius) continue;
        if ((priors.values.row(y) - priors.values.row(start)).lpNorm<1>() > similarity_tol) continue;
        agg.cluster_of[y] = id;
        ++size;
        queue.push_back(y);
      }
    }
    agg.sizes.push_back(size);
  }

  std::vector<CsrMatrix::Triplet> t;
  const auto rp = graph.weights.row_ptr();
  const auto ci = graph.weights.col_index();
  const auto w = graph.weights.values();
  for (Index x = 0; x < n; ++x) {
    for (Index p = rp[x]; p < rp[x + 1]; ++p) {
      const Index a = agg.cluster_of[x];
      const Index b = agg.cluster_of[ci[p]];
      if (a != b) t.push_back({a, b, w[p]});
    }
  }
  agg.super_adjacency = CsrMatrix::from_triplets(agg.clusters(), agg.clusters(), std::move(t));
  return agg;
}

Eigen::VectorXd delta_weights(const Aggregation& agg, const WeightedLatticeGraph& graph) {
  if (graph.size() != agg.voxels()) throw DimsMismatch("delta_weights: size mismatch");
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(agg.voxels());
  for (Index x = 0; x < agg.voxels(); ++x) {
    for (Index y : lattice_neighbors(graph.dims, x)) {
      // Hard assignments differ in exactly two entries.
      if (agg.cluster_of[x] != agg.cluster_of[y]) delta[x] += 2.0;
    }
  }
  return delta;
}

Laplacian aggregate_laplacian(const Aggregation& agg) {
  if (agg.clusters() < 2) throw DegenerateGraph("aggregate graph has a single super-vertex");
  return laplacian_from_adjacency(agg.super_adjacency, LaplacianMode::Normalized);
}

CoarseBasis coarsen_basis(const ColumnBasis& basis, const Aggregation& agg,
                          const WeightedLatticeGraph& graph, CoarsenVariant variant, int m) {
  if (basis.rows() != agg.voxels()) throw DimsMismatch("coarsen_basis: basis rows != N");
  const int cols = m > 0 ? std::min(m, basis.cols()) : basis.cols();
  const Index nb = agg.clusters();
  CoarseBasis out;
  if (variant == CoarsenVariant::Delta) out.delta = delta_weights(agg, graph);

  Eigen::VectorXd weight(agg.voxels());
  for (Index x = 0; x < agg.voxels(); ++x) {
    const double inv = 1.0 / static_cast<double>(agg.sizes[agg.cluster_of[x]]);
    weight[x] = variant == CoarsenVariant::Delta ? out.delta[x] * inv : inv;
  }
  Eigen::MatrixXd coarse = Eigen::MatrixXd::Zero(nb, cols);
  Eigen::MatrixXd block;
  const int step = 64;
  for (int b = 0; b < cols; b += step) {
    const int cnt = std::min(step, cols - b);
    basis.read_columns(b, cnt, block);
    for (Index x = 0; x < agg.voxels(); ++x) {
      if (weight[x] != 0.0) coarse.block(agg.cluster_of[x], b, 1, cnt) += weight[x] * block.row(x);
    }
  }

  const GramSchmidtResult gs = gram_schmidt(coarse);
  const int kept = static_cast<int>(gs.kept.size());
  if (kept == 0) throw EmptyBasis("every coarsened column collapsed");
  Eigen::VectorXd quotients = Eigen::VectorXd::Zero(kept);
  if (nb > 1) {
    const Laplacian lap = aggregate_laplacian(agg);
    for (int i = 0; i < kept; ++i) quotients[i] = std::max(0.0, ncut_value(lap, gs.q.col(i)));
  }
  std::vector<int> order(kept);
  for (int i = 0; i < kept; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return quotients[a] < quotients[b]; });
  out.vectors.resize(nb, kept);
  out.values.resize(kept);
  for (int i = 0; i < kept; ++i) {
    out.vectors.col(i) = gs.q.col(order[i]);
    out.values[i] = quotients[order[i]];
    out.source_cols.push_back(gs.kept[order[i]]);
  }
  out.dropped = gs.dropped();
  return out;
}

Eigen::MatrixXd aggregate_priors(const Eigen::MatrixXd& priors, const Aggregation& agg) {
  if (priors.rows() != agg.voxels()) throw DimsMismatch("aggregate_priors: size mismatch");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(agg.clusters(), priors.cols());
  for (Index x = 0; x < agg.voxels(); ++x) out.row(agg.cluster_of[x]) += priors.row(x);
  for (Index y = 0; y < agg.clusters(); ++y) out.row(y) /= static_cast<double>(agg.sizes[y]);
  return out;
}

ProbabilityField propagate(const Eigen::MatrixXd& u_bar, const Aggregation& agg) {
  if (u_bar.rows() != agg.clusters()) throw DimsMismatch("propagate: U_bar rows != N_bar");
  ProbabilityField out;
  out.dims = agg.dims;
  out.values.resize(agg.voxels(), u_bar.cols());
  for (Index x = 0; x < agg.voxels(); ++x) out.values.row(x) = u_bar.row(agg.cluster_of[x]);
  return out;
}

Eigen::MatrixXd propagate(const Eigen::MatrixXd& u_bar, const CsrMatrix& eta) {
  if (u_bar.rows() != eta.cols()) throw DimsMismatch("propagate: U_bar rows != N_bar");
  return eta * u_bar;
}

void save_cluster_map(const Aggregation& agg, const std::filesystem::path& path,
                      const std::vector<double>& spacing) {
  std::vector<std::uint32_t> ids(agg.cluster_of.begin(), agg.cluster_of.end());
  RawjHeader h{agg.dims, spacing.empty() ? std::vector<double>(agg.dims.ndim(), 1.0) : spacing,
               "u32", 1};
  write_rawj(path, h, std::as_bytes(std::span<const std::uint32_t>(ids)));
}

}  // namespace rwfast

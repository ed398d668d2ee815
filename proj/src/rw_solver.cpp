#include "rwfast/rw_solver.hpp"

#include <cmath>
#include <string>

#include "rwfast/errors.hpp"

namespace rwfast {

void LabelProblem::validate(Index n) const {
  if (labels < 1) throw InvalidParam("K must be >= 1");
  if (!(gamma >= 0.0)) throw InvalidParam("gamma must be >= 0");
  if (seeds.voxel_count() != n && !(seeds.voxel_count() == 0 && seeds.seed_count() == 0)) {
    throw DimsMismatch("seed partition voxel count does not match the graph");
  }
  for (int l : seeds.seed_labels()) {
    if (l >= labels) throw InvalidParam("seed label " + std::to_string(l) + " >= K");
  }
  if (priors) {
    if (priors->rows() != n || priors->cols() != labels) {
      throw DimsMismatch("priors must be N x K");
    }
    if (row_sum_deviation(*priors) > 1e-6) throw InvalidParam("prior rows must sum to 1");
  } else if (gamma > 0.0) {
    throw InvalidParam("gamma > 0 requires priors");
  }
  if (gamma == 0.0 && seeds.seed_count() == 0) {
    throw SingularSystem("gamma = 0 with no seeds leaves the system singular");
  }
}

double normalize_rows(Eigen::MatrixXd& u) {
  const double deviation = row_sum_deviation(u);
  for (Index x = 0; x < u.rows(); ++x) {
    auto row = u.row(x);
    row = row.cwiseMax(0.0);
    const double s = row.sum();
    if (s > 0.0) {
      row /= s;
    } else {
      row.setConstant(1.0 / static_cast<double>(u.cols()));
    }
  }
  return deviation;
}

ProbabilityField solve_basic(const Laplacian& lap, const LabelProblem& problem,
                             const CgOptions& options, SolveStats* stats) {
  const Index n = lap.size();
  problem.validate(n);
  const int k = problem.labels;
  const SeedPartition seeds =
      problem.seeds.voxel_count() == n ? problem.seeds : SeedPartition(n, {});
  const auto& seed_ids = seeds.seed_indices();
  const auto& free_ids = seeds.free_indices();
  const Index s = seeds.seed_count();
  const Index nf = n - s;

  const Eigen::VectorXd d_sqrt =
      lap.mode == LaplacianMode::Normalized ? lap.d_sqrt : Eigen::VectorXd::Ones(n);

  ProbabilityField out;
  out.dims = lap.dims;
  out.values = Eigen::MatrixXd::Zero(n, k);
  const Eigen::MatrixXd u_s = seeds.one_hot(k);
  for (Index i = 0; i < s; ++i) out.values.row(seed_ids[i]) = u_s.row(i);
  if (nf == 0) return out;

  const LaplacianBlocks blocks = partition_blocks(lap, seeds);
  Eigen::MatrixXd u_s_hat = u_s;
  for (Index i = 0; i < s; ++i) u_s_hat.row(i) *= d_sqrt[seed_ids[i]];

  // gamma = 0: K-1 solves, last column from the row-sum identity.
  const int solved = (problem.gamma == 0.0 && k > 1) ? k - 1 : k;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nf, solved);
  if (s > 0) {
    Eigen::MatrixXd bt_us(nf, solved);
    // B^T U_s with B stored S x (N - S).
    bt_us.setZero();
    const auto rp = blocks.coupling.row_ptr();
    const auto ci = blocks.coupling.col_index();
    const auto vals = blocks.coupling.values();
    for (Index i = 0; i < s; ++i) {
      for (Index p = rp[i]; p < rp[i + 1]; ++p) {
        bt_us.row(ci[p]) += vals[p] * u_s_hat.row(i).leftCols(solved);
      }
    }
    rhs -= bt_us;
  }
  if (problem.gamma > 0.0) {
    for (Index j = 0; j < nf; ++j) {
      const Index x = free_ids[j];
      rhs.row(j) += problem.gamma * d_sqrt[x] * problem.priors->row(x).leftCols(solved);
    }
  }

  const CsrMatrix system = problem.gamma > 0.0 ? blocks.free.shifted(problem.gamma) : blocks.free;
  CgResult cg = cg_solve(system, rhs, options);

  for (Index j = 0; j < nf; ++j) {
    const Index x = free_ids[j];
    out.values.row(x).leftCols(solved) = cg.solution.row(j) / d_sqrt[x];
    if (solved < k) out.values(x, k - 1) = 1.0 - out.values.row(x).leftCols(solved).sum();
  }
  const double deviation = normalize_rows(out.values);
  if (stats) {
    stats->cg_iterations = cg.iterations;
    stats->pre_normalization_deviation = deviation;
  }
  return out;
}

}  // namespace rwfast

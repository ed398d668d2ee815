#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rwfast/sparse.hpp"

namespace rwfast {

struct CgOptions {
  double tol = 1e-8;
  Index max_iter = 0;  // 0 selects 10 * N
  bool throw_on_failure = true;
};

struct CgResult {
  Eigen::MatrixXd solution;
  std::vector<double> residuals;  // final relative residual per column
  std::vector<Index> iterations;
  bool converged = true;
};

/// Jacobi-preconditioned conjugate gradients, one independent solve per
/// column of `rhs`. Throws NotConverged (with per-column residuals) when a
/// column misses `tol` within `max_iter` and `throw_on_failure` is set.
CgResult cg_solve(const CsrMatrix& a, const Eigen::MatrixXd& rhs, const CgOptions& options = {});

/// m eigenpairs with the smallest eigenvalues; columns orthonormal, values
/// ascending. When the solver stops early only the converged prefix is kept.
struct EigenBasis {
  Eigen::MatrixXd vectors;
  Eigen::VectorXd values;
  int requested = 0;
  Index iterations = 0;

  int size() const { return static_cast<int>(values.size()); }
  bool complete() const { return size() >= requested; }
};

struct EigOptions {
  double tol = 1e-6;
  std::uint64_t seed = 0x5eed;
  Index max_iter = 1000;
  int filter_degree = 12;
  int block_guard = 8;
  /// Iterations without a newly converged pair before switching from the
  /// Chebyshev filter to shift-invert iteration.
  Index stall_iterations = 40;
};

/// Chebyshev-filtered block subspace iteration with Rayleigh-Ritz and
/// locking of converged leading pairs, falling back to shift-invert
/// iteration (sparse LDL^T) when the filter stalls. `a` must be symmetric PSD.
/// Pair i is converged when |A q - theta q| <= tol * max(1, theta).
EigenBasis smallest_eigs(const CsrMatrix& a, int m, const EigOptions& options = {});

/// Max over columns of |A q_i - lambda_i q_i|.
double max_eigen_residual(const CsrMatrix& a, const EigenBasis& basis);

struct GramSchmidtResult {
  Eigen::MatrixXd q;
  std::vector<int> kept;  // source column of each output column
  int dropped() const { return static_cast<int>(source_cols - static_cast<Index>(kept.size())); }
  Index source_cols = 0;
};

/// Two-pass modified Gram-Schmidt. A column is dropped when its norm after
/// projection falls below `drop_tol` times its norm before projection.
GramSchmidtResult gram_schmidt(const Eigen::MatrixXd& v, double drop_tol = 1e-10);

}  // namespace rwfast

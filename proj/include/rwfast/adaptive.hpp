#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rwfast/graph.hpp"
#include "rwfast/rw_solver.hpp"
#include "rwfast/spectral_pack.hpp"

namespace rwfast {

struct AdaptivePolicy {
  double epsilon = 0.1;
  int m_start = 0;  // 0 = max(K, m / 8)
  int m_step = 0;   // 0 = max(1, m / 8)
  int stride = 4;   // label subsampling stride per label-grid axis

  void validate() const;
};

/// min over ||alpha|| <= bound of ||q_s alpha - u||^2.
double seed_fit(const Eigen::MatrixXd& q_s, const Eigen::VectorXd& u, double bound);

/// Residual of p after projecting out a growing orthonormal prefix. `columns`
/// counts how many basis columns have already been removed.
struct PriorResidual {
  int columns = 0;
  Eigen::VectorXd residual;

  double value() const { return residual.squaredNorm(); }
};

/// ||p - Q Q^T p||^2 for the first m columns of `basis`; when `cache` holds a
/// residual for fewer columns only the new ones are projected out.
double prior_residual(const ColumnBasis& basis, int m, const Eigen::VectorXd& p,
                      PriorResidual& cache);
double prior_residual(const Eigen::MatrixXd& q, const Eigen::VectorXd& p);

/// Label indices on a uniform sub-grid with the given stride per axis of the
/// label grid (flattened first-axis-fastest). An empty grid means a 1-D grid
/// of `labels` entries.
std::vector<int> strided_labels(int labels, const std::vector<int>& label_grid, int stride);

struct MSelection {
  int m_use = 0;
  bool passed = false;  // false: no tested m met the thresholds
  std::vector<int> tested;
  std::vector<double> worst_seed_fit;        // per tested m, / f_max
  std::vector<double> worst_prior_residual;  // per tested m, / g_max
};

/// Smallest scheduled m at which every seed label fit is within f_max and
/// every strided prior column residual within g_max. Thresholds and norm
/// bounds follow the Laplacian mode: normalized problems are measured in the
/// D^{1/2}-scaled variables the fast solver uses.
MSelection select_m(const ColumnBasis& basis, const Laplacian& lap, const LabelProblem& problem,
                    const AdaptivePolicy& policy, const std::vector<int>& label_grid = {});

}  // namespace rwfast

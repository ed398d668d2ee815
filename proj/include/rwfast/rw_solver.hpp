#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "rwfast/graph.hpp"
#include "rwfast/image.hpp"
#include "rwfast/linalg.hpp"

namespace rwfast {

/// Online inputs of a random walker solve: hard seeds, soft priors, and the
/// prior weight gamma.
struct LabelProblem {
  int labels = 2;
  SeedPartition seeds;
  std::optional<Eigen::MatrixXd> priors;  // N x K, row-stochastic
  double gamma = 0.0;

  /// Throws InvalidParam / SingularSystem when the problem is ill-posed for
  /// an N-voxel graph.
  void validate(Index n) const;
};

struct SolveStats {
  std::vector<Index> cg_iterations;
  double pre_normalization_deviation = 0.0;
};

/// Clamps negative entries to zero and rescales each row to sum to one.
/// Returns the largest |row sum - 1| seen before the rescale.
double normalize_rows(Eigen::MatrixXd& u);

/// Reference solver: assembles (L_n + gamma I) U_n = gamma P_n - B^T U_s and
/// solves it with CG. In Normalized mode the system is posed on
/// D^{1/2}-scaled unknowns and mapped back.
ProbabilityField solve_basic(const Laplacian& lap, const LabelProblem& problem,
                             const CgOptions& options = {}, SolveStats* stats = nullptr);

}  // namespace rwfast

#pragma once

#include <optional>

#include <Eigen/Dense>

#include "rwfast/graph.hpp"
#include "rwfast/image.hpp"
#include "rwfast/rw_solver.hpp"
#include "rwfast/spectral_pack.hpp"

namespace rwfast {

/// Largest seed count accepted by the dense small-system solve.
inline constexpr Index kMaxSeeds = 10000;

struct FastSolveOptions {
  int m_use = 0;  // 0 = every column of the basis
  int block_cols = 64;
  double min_rcond = 1e-14;
};

struct FastSolveReport {
  int m_use = 0;
  double pre_normalization_deviation = 0.0;
  double rcond = 1.0;
  double seconds = 0.0;
};

/// Spectral random walker solve. `basis` holds the smallest eigenpairs of
/// `lap` (normalized or not; d_sqrt is taken from `lap`). Columns are
/// streamed in blocks of `block_cols`, twice.
ProbabilityField solve_fast(const ColumnBasis& basis, const Laplacian& lap,
                            const LabelProblem& problem, const FastSolveOptions& options = {},
                            FastSolveReport* report = nullptr);

/// Convenience overload: rebuilds the normalized Laplacian of `image` at the
/// pack's beta.
ProbabilityField solve_fast(const SpectralPack& pack, const Image& image,
                            const LabelProblem& problem, int m_use = 0,
                            FastSolveReport* report = nullptr);

}  // namespace rwfast

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rwfast/adaptive.hpp"
#include "rwfast/aggregation.hpp"
#include "rwfast/image.hpp"
#include "rwfast/linalg.hpp"
#include "rwfast/spectral_pack.hpp"

namespace rwfast {

/// Discrete displacement labels on a regular grid centred on zero. Label 0
/// is the most negative corner; the first axis varies fastest.
struct DisplacementGrid {
  std::vector<int> extents;  // odd, one per image axis
  int step = 1;  // voxels

  void validate() const;
  int ndim() const { return static_cast<int>(extents.size()); }
  int labels() const;
  int zero_label() const;
  std::vector<double> vector(int label) const;
  /// K x d table of displacement vectors.
  Eigen::MatrixXd table() const;
};

struct DisplacementField {
  Dims dims;
  Eigen::MatrixXd vectors;  // N x d, voxel units

  Index size() const { return vectors.rows(); }
};

void save_displacement_field(const DisplacementField& field, const std::filesystem::path& path);
DisplacementField load_displacement_field(const std::filesystem::path& path);

inline constexpr double kDefaultPriorSharpness = 1024.0;

/// p_k(x) proportional to exp(-sharpness * s_k(x)^2 / sigma^2) with s_k the
/// mean absolute patch difference between fixed at x and moving at x + d_k
/// (edge-clamped) and sigma the mean of s over all voxels and labels.
ProbabilityField similarity_priors(const Image& fixed, const Image& moving,
                                   const DisplacementGrid& grid, int patch_radius,
                                   double sharpness = kDefaultPriorSharpness);

DisplacementField expected_displacement(const ProbabilityField& u, const DisplacementGrid& grid);

/// out(x) = labels(round(x + field(x))), clamped to the volume.
LabelMap warp_labels(const LabelMap& labels, const DisplacementField& field);

enum class RegistrationSolver { Basic, Fast };
enum class AggregateBasis { Naive, Delta, Direct };

struct AggregationOptions {
  int max_radius = 3;
  double similarity_tol = 0.05;
  AggregateBasis basis = AggregateBasis::Delta;
};

struct RegistrationOptions {
  double beta = 50.0;
  double gamma = 1.0;
  int patch_radius = 2;
  double prior_sharpness = kDefaultPriorSharpness;
  RegistrationSolver solver = RegistrationSolver::Basic;
  int m_use = 0;  // fast path; 0 = whole basis
  bool adaptive = false;
  AdaptivePolicy policy;
  std::optional<AggregationOptions> aggregation;
  /// Landmarks: voxel index and the displacement label it is pinned to.
  std::vector<std::pair<Index, int>> landmarks;
  CgOptions cg;
};

struct RegistrationReport {
  int m_use = 0;
  Index clusters = 0;
  double prior_seconds = 0.0;
  double solve_seconds = 0.0;
  double total_seconds = 0.0;
  bool adaptive_passed = true;
};

struct RegistrationResult {
  ProbabilityField probabilities;
  DisplacementField field;
  RegistrationReport report;
};

/// priors -> optional aggregation -> optional adaptive m -> solve ->
/// propagate -> expected displacement. The fast path and aggregation need a
/// pack built from `fixed`; a pack at another beta is refreshed first.
RegistrationResult register_images(const Image& fixed, const Image& moving,
                                   const DisplacementGrid& grid,
                                   const RegistrationOptions& options,
                                   std::shared_ptr<const SpectralPack> pack = nullptr);

}  // namespace rwfast

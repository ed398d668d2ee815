#pragma once

#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "rwfast/graph.hpp"
#include "rwfast/image.hpp"
#include "rwfast/spectral_pack.hpp"

namespace rwfast {

/// q^T L q / q^T q. Throws ZeroVector for q = 0.
double ncut_value(const CsrMatrix& lap, const Eigen::VectorXd& q);
inline double ncut_value(const Laplacian& lap, const Eigen::VectorXd& q) {
  return ncut_value(lap.matrix, q);
}

/// Plain reuses the stored vectors as they are. DegreeScaled re-expresses
/// each stored vector against the new degrees, q' ~ D_new^{1/2} D_old^{-1/2} q,
/// so the null vector of the old graph maps onto the null vector of the new one.
enum class RefreshMode { DegreeScaled, Plain };

/// Base-pack eigenvectors paired with Rayleigh quotients of a Laplacian at a
/// different beta. Columns are exposed in ascending quotient order.
class RefreshedPack final : public ColumnBasis {
 public:
  /// `row_scale` (N) and `col_scale` (base m) are empty in Plain mode.
  RefreshedPack(std::shared_ptr<const SpectralPack> base, double new_beta, Laplacian lap,
                Eigen::VectorXd lambda_hat, std::vector<int> order,
                Eigen::VectorXd row_scale = {}, Eigen::VectorXd col_scale = {});

  Index rows() const override { return base_->voxels(); }
  int cols() const override { return static_cast<int>(order_.size()); }
  const Eigen::VectorXd& values() const override { return lambda_hat_; }
  void read_columns(int first, int count, Eigen::MatrixXd& out) const override;

  const SpectralPack& base() const { return *base_; }
  double base_beta() const { return base_->beta; }
  double new_beta() const { return new_beta_; }
  /// Normalized Laplacian at new_beta; its d_sqrt is the refreshed one.
  const Laplacian& laplacian() const { return lap_; }
  const Eigen::VectorXd& d_sqrt() const { return lap_.d_sqrt; }
  /// Base column index of refreshed column i.
  const std::vector<int>& order() const { return order_; }
  RefreshMode mode() const { return row_scale_.size() ? RefreshMode::DegreeScaled : RefreshMode::Plain; }

 private:
  std::shared_ptr<const SpectralPack> base_;
  double new_beta_;
  Laplacian lap_;
  Eigen::VectorXd lambda_hat_;
  std::vector<int> order_;
  Eigen::VectorXd row_scale_;
  Eigen::VectorXd col_scale_;
};

/// Re-evaluates every base column's Rayleigh quotient against the normalized
/// Laplacian of `image` at `new_beta`; negative quotients clamp to 0.
RefreshedPack refresh(std::shared_ptr<const SpectralPack> pack, const Image& image,
                      double new_beta, RefreshMode mode = RefreshMode::DegreeScaled);

struct SetRefresh {
  RefreshedPack pack;
  std::size_t base_index;
};

/// Refreshes from the pack whose beta is nearest in log distance.
SetRefresh refresh_from_set(const PackSet& packs, const Image& image, double new_beta,
                            RefreshMode mode = RefreshMode::DegreeScaled);

}  // namespace rwfast

#include "rwfast/refresh.hpp"

#include <algorithm>
#include <numeric>

#include "rwfast/errors.hpp"

namespace rwfast {

double ncut_value(const CsrMatrix& lap, const Eigen::VectorXd& q) {
  if (lap.rows() != q.size()) throw DimsMismatch("ncut_value: size mismatch");
  const double qq = q.squaredNorm();
  if (qq == 0.0) throw ZeroVector("ncut_value: zero vector");
  return q.dot((lap * q).col(0)) / qq;
}

RefreshedPack::RefreshedPack(std::shared_ptr<const SpectralPack> base, double new_beta,
                             Laplacian lap, Eigen::VectorXd lambda_hat, std::vector<int> order,
                             Eigen::VectorXd row_scale, Eigen::VectorXd col_scale)
    : base_(std::move(base)),
      new_beta_(new_beta),
      lap_(std::move(lap)),
      lambda_hat_(std::move(lambda_hat)),
      order_(std::move(order)),
      row_scale_(std::move(row_scale)),
      col_scale_(std::move(col_scale)) {}

void RefreshedPack::read_columns(int first, int count, Eigen::MatrixXd& out) const {
  out.resize(rows(), count);
  for (int j = 0; j < count; ++j) {
    const int src = order_[first + j];
    out.col(j) = base_->vectors.col(src).cast<double>();
    if (row_scale_.size()) out.col(j) = out.col(j).cwiseProduct(row_scale_) * col_scale_[src];
  }
}

RefreshedPack refresh(std::shared_ptr<const SpectralPack> pack, const Image& image,
                      double new_beta, RefreshMode mode) {
  if (!pack) throw InvalidParam("refresh: null pack");
  if (!(new_beta >= 0.0)) throw InvalidParam("refresh: beta must be >= 0");
  if (image.dims != pack->dims || image_content_hash(image) != pack->image_hash) {
    throw ImageMismatch("refresh: image does not match the pack");
  }
  Laplacian lap = laplacian(build_graph(image, new_beta), LaplacianMode::Normalized);
  const int m = pack->size();
  Eigen::VectorXd row_scale, col_scale;
  if (mode == RefreshMode::DegreeScaled) {
    const Eigen::VectorXd old_d =
        laplacian(build_graph(image, pack->beta), LaplacianMode::Normalized).d_sqrt;
    row_scale = lap.d_sqrt.cwiseQuotient(old_d);
    col_scale.resize(m);
    for (int j = 0; j < m; ++j) {
      col_scale[j] = 1.0 / pack->vectors.col(j).cast<double>().cwiseProduct(row_scale).norm();
    }
  }
  Eigen::VectorXd quotients(m);
  Eigen::MatrixXd block;
  const PackBasis base(*pack);
  const int step = 64;
  for (int b = 0; b < m; b += step) {
    const int cnt = std::min(step, m - b);
    base.read_columns(b, cnt, block);
    if (row_scale.size()) block = row_scale.asDiagonal() * block;
    const Eigen::MatrixXd lq = lap.matrix * block;
    for (int j = 0; j < cnt; ++j) {
      quotients[b + j] =
          std::max(0.0, block.col(j).dot(lq.col(j)) / block.col(j).squaredNorm());
    }
  }
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return quotients[a] < quotients[b]; });
  Eigen::VectorXd sorted(m);
  for (int i = 0; i < m; ++i) sorted[i] = quotients[order[i]];
  return RefreshedPack(std::move(pack), new_beta, std::move(lap), std::move(sorted),
                       std::move(order), std::move(row_scale), std::move(col_scale));
}

SetRefresh refresh_from_set(const PackSet& packs, const Image& image, double new_beta,
                            RefreshMode mode) {
  const std::size_t index = packs.nearest(new_beta);
  return {refresh(packs.packs()[index], image, new_beta, mode), index};
}

}  // namespace rwfast

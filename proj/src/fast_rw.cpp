#include "rwfast/fast_rw.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "rwfast/errors.hpp"

namespace rwfast {

namespace {

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& a, const std::vector<Index>& rows) {
  Eigen::MatrixXd out(static_cast<Index>(rows.size()), a.cols());
  for (Index c = 0; c < a.cols(); ++c) {
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i), c) = a(rows[i], c);
  }
  return out;
}

}  // namespace

ProbabilityField solve_fast(const ColumnBasis& basis, const Laplacian& lap,
                            const LabelProblem& problem, const FastSolveOptions& options,
                            FastSolveReport* report) {
  const auto start = std::chrono::steady_clock::now();
  const Index n = lap.size();
  if (basis.rows() != n) throw DimsMismatch("basis rows do not match the Laplacian");
  problem.validate(n);
  const int k = problem.labels;
  const int m = options.m_use > 0 ? options.m_use : basis.cols();
  if (m > basis.cols()) {
    throw InvalidParam("m_use=" + std::to_string(m) + " exceeds basis size " +
                       std::to_string(basis.cols()));
  }
  if (m < k) {
    throw InsufficientBasis("m_use=" + std::to_string(m) + " cannot represent " +
                            std::to_string(k) + " labels");
  }
  const SeedPartition seeds =
      problem.seeds.voxel_count() == n ? problem.seeds : SeedPartition(n, {});
  const Index s = seeds.seed_count();
  if (s > kMaxSeeds) throw InvalidParam("too many seeds for the dense small system");
  const auto& seed_ids = seeds.seed_indices();
  const auto& free_ids = seeds.free_indices();
  const double gamma = problem.gamma;
  const bool null_path = gamma == 0.0;

  const Eigen::VectorXd d =
      lap.mode == LaplacianMode::Normalized ? lap.d_sqrt : Eigen::VectorXd::Ones(n);

  Eigen::MatrixXd us_hat = seeds.one_hot(k);
  for (Index i = 0; i < s; ++i) us_hat.row(i) *= d[seed_ids[i]];

  // Scaled priors with seeded rows zeroed.
  Eigen::MatrixXd p_hat;
  if (gamma > 0.0) {
    p_hat = Eigen::MatrixXd::Zero(n, k);
    for (Index x : free_ids) p_hat.row(x) = d[x] * problem.priors->row(x);
  }

  const CsrMatrix coupling = lap.matrix.select(seed_ids, free_ids);
  const CsrMatrix seeded = lap.matrix.select(seed_ids, seed_ids);

  // First pass: seed rows, coupling products, prior projections and, for
  // gamma = 0, overlaps with the null vector of the current Laplacian.
  const int block = std::max(1, options.block_cols);
  Eigen::VectorXd g_null;
  if (null_path) g_null = d / d.norm();
  Eigen::MatrixXd g_all(s, m);
  Eigen::MatrixXd qs_all(s, m);
  Eigen::MatrixXd c_all = Eigen::MatrixXd::Zero(m, k);
  Eigen::VectorXd overlap = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd q_block;
  for (int b = 0; b < m; b += block) {
    const int cnt = std::min(block, m - b);
    basis.read_columns(b, cnt, q_block);
    if (s > 0) {
      qs_all.middleCols(b, cnt) = gather_rows(q_block, seed_ids);
      g_all.middleCols(b, cnt) = coupling * gather_rows(q_block, free_ids);
    }
    if (gamma > 0.0) c_all.middleRows(b, cnt).noalias() = q_block.transpose() * p_hat;
    if (null_path) overlap.segment(b, cnt).noalias() = q_block.transpose() * g_null;
  }

  // gamma = 0: the column closest to the null vector is replaced by it and
  // the null direction is projected out of the others.
  int null_col = -1;
  if (null_path) overlap.cwiseAbs().maxCoeff(&null_col);
  std::vector<int> keep;
  keep.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    if (j != null_col) keep.push_back(j);
  }
  const int used = static_cast<int>(keep.size());
  const Eigen::VectorXd& lambda = basis.values();
  Eigen::VectorXd w(used);
  Eigen::VectorXd ov(used);
  Eigen::MatrixXd g_mat(s, used);
  Eigen::MatrixXd q_s(s, used);
  Eigen::MatrixXd c_mat(used, k);
  for (int i = 0; i < used; ++i) {
    const int j = keep[static_cast<std::size_t>(i)];
    const double l = std::max(lambda[j], 0.0);
    w[i] = null_path ? 1.0 / std::max(l, 1e-14) : 1.0 / (l + gamma);
    ov[i] = overlap[j];
    g_mat.col(i) = g_all.col(j);
    q_s.col(i) = qs_all.col(j);
    c_mat.row(i) = c_all.row(j);
  }

  Eigen::MatrixXd f_s = Eigen::MatrixXd::Zero(s, k);
  Eigen::RowVectorXd null_coef = Eigen::RowVectorXd::Zero(k);
  double rcond = 1.0;
  if (s > 0) {
    Eigen::MatrixXd h;
    if (null_path) {
      h = coupling * gather_rows(g_null, free_ids);
      g_mat.noalias() -= h * ov.transpose();
      q_s.noalias() -= gather_rows(g_null, seed_ids) * ov.transpose();
    }
    const Eigen::MatrixXd gw = g_mat * w.asDiagonal();
    Eigen::MatrixXd rhs = seeded * us_hat;
    if (gamma > 0.0) rhs += gamma * (us_hat + gw * c_mat);
    Eigen::MatrixXd a;
    if (null_path) {
      a = Eigen::MatrixXd::Zero(s + 1, s + 1);
      a.topLeftCorner(s, s) = Eigen::MatrixXd::Identity(s, s) - gw * q_s.transpose();
      a.topRightCorner(s, 1) = -h;
      a.bottomLeftCorner(1, s) = gather_rows(g_null, seed_ids).transpose();
      rhs.conservativeResize(s + 1, Eigen::NoChange);
      rhs.row(s).setZero();
    } else {
      a = Eigen::MatrixXd::Identity(s, s) - gw * q_s.transpose();
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    rcond = lu.rcond();
    if (!(rcond >= options.min_rcond)) {
      throw SingularSmallSystem("seed system is numerically singular", rcond);
    }
    const Eigen::MatrixXd sol = lu.solve(rhs);
    f_s = sol.topRows(s);
    if (null_path) null_coef = sol.row(s);
  }

  Eigen::MatrixXd z = q_s.transpose() * f_s;
  if (gamma > 0.0) z += gamma * c_mat;
  z = w.asDiagonal() * z;

  // Second pass: U_hat = Q' z with Q' the deflated kept columns.
  Eigen::MatrixXd z_full = Eigen::MatrixXd::Zero(m, k);
  for (int i = 0; i < used; ++i) z_full.row(keep[static_cast<std::size_t>(i)]) = z.row(i);
  Eigen::MatrixXd u_hat = Eigen::MatrixXd::Zero(n, k);
  for (int b = 0; b < m; b += block) {
    const int cnt = std::min(block, m - b);
    basis.read_columns(b, cnt, q_block);
    u_hat.noalias() += q_block * z_full.middleRows(b, cnt);
  }
  if (null_path) u_hat += g_null * (null_coef - ov.transpose() * z);

  ProbabilityField out;
  out.dims = lap.dims;
  out.values.resize(n, k);
  for (Index x : free_ids) out.values.row(x) = u_hat.row(x) / d[x];
  const Eigen::MatrixXd one_hot = seeds.one_hot(k);
  for (Index i = 0; i < s; ++i) out.values.row(seed_ids[i]) = one_hot.row(i);
  const double deviation = normalize_rows(out.values);

  if (report) {
    report->m_use = m;
    report->pre_normalization_deviation = deviation;
    report->rcond = rcond;
    report->seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return out;
}

ProbabilityField solve_fast(const SpectralPack& pack, const Image& image,
                            const LabelProblem& problem, int m_use, FastSolveReport* report) {
  if (image.dims != pack.dims) throw ImageMismatch("image dims do not match the pack");
  const Laplacian lap = laplacian(build_graph(image, pack.beta), LaplacianMode::Normalized);
  FastSolveOptions options;
  options.m_use = m_use;
  return solve_fast(PackBasis(pack), lap, problem, options, report);
}

}  // namespace rwfast

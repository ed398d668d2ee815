#include "rwfast/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rwfast/errors.hpp"

namespace rwfast {

void AdaptivePolicy::validate() const {
  if (!(epsilon > 0.0)) throw InvalidParam("epsilon must be > 0");
  if (m_start < 0 || m_step < 0) throw InvalidParam("m_start and m_step must be >= 0");
  if (stride < 1) throw InvalidParam("label stride must be >= 1");
}

double seed_fit(const Eigen::MatrixXd& q_s, const Eigen::VectorXd& u, double bound) {
  if (q_s.rows() != u.size()) throw DimsMismatch("seed_fit: Q_s rows must match u");
  if (q_s.cols() == 0 || bound <= 0.0) return u.squaredNorm();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(q_s, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const Eigen::VectorXd c = svd.matrixU().transpose() * u;
  const double cutoff = sigma.size() > 0 ? sigma[0] * 1e-12 : 0.0;

  auto coefficients = [&](double mu) {
    Eigen::VectorXd a(sigma.size());
    for (Index i = 0; i < sigma.size(); ++i) {
      a[i] = (mu == 0.0 && sigma[i] <= cutoff) ? 0.0 : sigma[i] * c[i] / (sigma[i] * sigma[i] + mu);
    }
    return a;
  };

  Eigen::VectorXd a = coefficients(0.0);
  if (a.norm() > bound) {
    // Ridge path: ||alpha(mu)|| decreases in mu; bisect keeping hi feasible.
    double lo = 0.0;
    double hi = sigma.cwiseProduct(c).norm() / bound;
    for (int it = 0; it < 2000 && hi - lo > std::numeric_limits<double>::epsilon() * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (coefficients(mid).norm() > bound) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    a = coefficients(hi);
  }
  const Eigen::VectorXd alpha = svd.matrixV() * a;
  return (q_s * alpha - u).squaredNorm();
}

namespace {

void project_out(const Eigen::MatrixXd& q_block, Eigen::VectorXd& r) {
  // Column by column, as in modified Gram-Schmidt.
  for (Index j = 0; j < q_block.cols(); ++j) r -= q_block.col(j).dot(r) * q_block.col(j);
}

}  // namespace

double prior_residual(const ColumnBasis& basis, int m, const Eigen::VectorXd& p,
                      PriorResidual& cache) {
  if (p.size() != basis.rows()) throw DimsMismatch("prior_residual: p size must match basis rows");
  if (m < 0 || m > basis.cols()) throw InvalidParam("prior_residual: m out of range");
  if (cache.columns > m || cache.residual.size() != p.size()) {
    cache.columns = 0;
    cache.residual = p;
  }
  if (cache.columns < m) {
    Eigen::MatrixXd block;
    basis.read_columns(cache.columns, m - cache.columns, block);
    project_out(block, cache.residual);
    cache.columns = m;
  }
  return cache.value();
}

double prior_residual(const Eigen::MatrixXd& q, const Eigen::VectorXd& p) {
  Eigen::VectorXd r = p;
  project_out(q, r);
  return r.squaredNorm();
}

std::vector<int> strided_labels(int labels, const std::vector<int>& label_grid, int stride) {
  std::vector<int> grid = label_grid.empty() ? std::vector<int>{labels} : label_grid;
  long long total = 1;
  for (int g : grid) total *= g;
  if (total != labels) throw DimsMismatch("label grid does not multiply to K");
  std::vector<int> out{0};
  int step = 1;
  for (int g : grid) {
    std::vector<int> next;
    for (int i = 0; i < g; i += stride) {
      for (int base : out) next.push_back(base + i * step);
    }
    out = std::move(next);
    step *= g;
  }
  std::sort(out.begin(), out.end());
  return out;
}

MSelection select_m(const ColumnBasis& basis, const Laplacian& lap, const LabelProblem& problem,
                    const AdaptivePolicy& policy, const std::vector<int>& label_grid) {
  policy.validate();
  const Index n = lap.size();
  if (basis.rows() != n) throw DimsMismatch("basis rows do not match the Laplacian");
  problem.validate(n);
  const int k = problem.labels;
  const int m_total = basis.cols();
  const bool normalized = lap.mode == LaplacianMode::Normalized;
  const Eigen::VectorXd d = normalized ? lap.d_sqrt : Eigen::VectorXd::Ones(n);
  const double eps2 = policy.epsilon * policy.epsilon;

  const int m_start = std::min(m_total, policy.m_start > 0 ? policy.m_start : std::max(k, m_total / 8));
  const int m_step = policy.m_step > 0 ? policy.m_step : std::max(1, m_total / 8);

  const SeedPartition seeds =
      problem.seeds.voxel_count() == n ? problem.seeds : SeedPartition(n, {});
  const Index s = seeds.seed_count();
  const auto& seed_ids = seeds.seed_indices();
  const bool use_seeds = s > 0;
  const bool use_priors = problem.priors.has_value() && problem.gamma > 0.0;
  const double bound = normalized ? d.norm() : std::sqrt(static_cast<double>(n));
  const double f_max = static_cast<double>(s) * eps2;
  const double g_max = eps2 * (normalized ? d.squaredNorm() : static_cast<double>(n));
  const Eigen::MatrixXd one_hot = seeds.one_hot(k);

  std::vector<int> prior_labels;
  std::vector<PriorResidual> caches;
  if (use_priors) {
    prior_labels = strided_labels(k, label_grid, policy.stride);
    for (int l : prior_labels) {
      caches.push_back({0, d.cwiseProduct(problem.priors->col(l))});
    }
  }

  MSelection sel;
  Eigen::MatrixXd q_s(s, 0);
  Eigen::MatrixXd block;
  int have = 0;
  for (int m = m_start; m <= m_total; m += m_step) {
    if (m > have) {
      basis.read_columns(have, m - have, block);
      if (use_seeds) {
        q_s.conservativeResize(Eigen::NoChange, m);
        for (Index i = 0; i < s; ++i) {
          q_s.row(i).segment(have, m - have) = block.row(seed_ids[i]) / d[seed_ids[i]];
        }
      }
      for (auto& c : caches) {
        project_out(block, c.residual);
        c.columns = m;
      }
      have = m;
    }
    double worst_f = 0.0;
    if (use_seeds) {
      for (int l = 0; l < k; ++l) {
        worst_f = std::max(worst_f, seed_fit(q_s, one_hot.col(l), bound) / f_max);
      }
    }
    double worst_g = 0.0;
    for (const auto& c : caches) worst_g = std::max(worst_g, c.value() / g_max);
    sel.tested.push_back(m);
    sel.worst_seed_fit.push_back(worst_f);
    sel.worst_prior_residual.push_back(worst_g);
    if (worst_f <= 1.0 && worst_g <= 1.0) {
      sel.m_use = m;
      sel.passed = true;
      return sel;
    }
  }
  sel.m_use = m_total;
  return sel;
}

}  // namespace rwfast

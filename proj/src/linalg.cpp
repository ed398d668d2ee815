#include "rwfast/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SparseCholesky>

#include "rwfast/errors.hpp"

namespace rwfast {

CgResult cg_solve(const CsrMatrix& a, const Eigen::MatrixXd& rhs, const CgOptions& options) {
  if (a.rows() != a.cols() || a.rows() != rhs.rows()) {
    throw DimsMismatch("cg_solve: operator is " + std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) + ", rhs has " + std::to_string(rhs.rows()) +
                       " rows");
  }
  if (!(options.tol > 0.0)) throw InvalidParam("cg_solve: tol must be positive");
  const Index n = a.rows();
  const Index max_iter = options.max_iter > 0 ? options.max_iter : 10 * std::max<Index>(n, 1);

  Eigen::VectorXd inv_diag = a.diagonal();
  for (Index i = 0; i < n; ++i) {
    if (!(inv_diag[i] > 0.0)) throw InvalidParam("cg_solve: operator diagonal must be positive");
    inv_diag[i] = 1.0 / inv_diag[i];
  }

  CgResult out;
  out.solution = Eigen::MatrixXd::Zero(n, rhs.cols());
  out.residuals.assign(static_cast<std::size_t>(rhs.cols()), 0.0);
  out.iterations.assign(static_cast<std::size_t>(rhs.cols()), 0);

  Eigen::VectorXd r(n), z(n), p(n), q(n);
  for (Index col = 0; col < rhs.cols(); ++col) {
    const double bnorm = rhs.col(col).stableNorm();
    if (bnorm == 0.0) continue;
    // Unit-norm right-hand side; tiny columns would otherwise underflow r.z.
    auto x = out.solution.col(col);
    r = rhs.col(col) / bnorm;
    z = inv_diag.cwiseProduct(r);
    p = z;
    double rz = r.dot(z);
    double rel = 1.0;
    Index it = 0;
    while (it < max_iter) {
      a.multiply(p, q);
      const double alpha = rz / p.dot(q);
      x.noalias() += alpha * p;
      r.noalias() -= alpha * q;
      ++it;
      rel = r.norm();
      if (rel <= options.tol) break;
      z = inv_diag.cwiseProduct(r);
      const double rz_next = r.dot(z);
      p = z + (rz_next / rz) * p;
      rz = rz_next;
    }
    x *= bnorm;
    out.residuals[static_cast<std::size_t>(col)] = rel;
    out.iterations[static_cast<std::size_t>(col)] = it;
    if (rel > options.tol) out.converged = false;
  }
  if (!out.converged && options.throw_on_failure) {
    throw NotConverged("cg_solve did not reach tol within " + std::to_string(max_iter) +
                           " iterations",
                       out.residuals);
  }
  return out;
}

namespace {

double gershgorin_upper(const CsrMatrix& a) {
  double best = 0.0;
  const auto rp = a.row_ptr();
  const auto vals = a.values();
  for (Index r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (Index p = rp[r]; p < rp[r + 1]; ++p) s += std::abs(vals[p]);
    best = std::max(best, s);
  }
  return best;
}

Eigen::MatrixXd orthonormal_columns(const Eigen::MatrixXd& y) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
  return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

void project_out(const Eigen::MatrixXd& basis, Eigen::MatrixXd& y) {
  if (basis.cols() == 0) return;
  for (int pass = 0; pass < 2; ++pass) y.noalias() -= basis * (basis.transpose() * y);
}

// Scaled Chebyshev filter: damps [lo, hi], amplifies below lo. `floor` is an
// estimate of the smallest eigenvalue used to keep magnitudes bounded.
Eigen::MatrixXd chebyshev_filter(const CsrMatrix& a, const Eigen::MatrixXd& x, int degree,
                                 double lo, double hi, double floor) {
  const double e = (hi - lo) / 2.0;
  const double c = (hi + lo) / 2.0;
  double sigma = e / (floor - c);
  const double tau = 2.0 / sigma;
  Eigen::MatrixXd prev = x;
  Eigen::MatrixXd cur(x.rows(), x.cols());
  a.multiply(x, cur);
  cur = (cur - c * x) * (sigma / e);
  Eigen::MatrixXd next(x.rows(), x.cols());
  for (int i = 2; i <= degree; ++i) {
    const double sigma_next = 1.0 / (tau - sigma);
    a.multiply(cur, next);
    next = (next - c * cur) * (2.0 * sigma_next / e) - (sigma * sigma_next) * prev;
    prev.swap(cur);
    cur.swap(next);
    sigma = sigma_next;
  }
  return cur;
}

struct Ritz {
  Eigen::MatrixXd x;
  Eigen::MatrixXd ax;
  Eigen::VectorXd theta;
};

Ritz rayleigh_ritz(const CsrMatrix& a, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd ax(x.rows(), x.cols());
  a.multiply(x, ax);
  Eigen::MatrixXd h = x.transpose() * ax;
  h = 0.5 * (h + h.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  return Ritz{x * es.eigenvectors(), ax * es.eigenvectors(), es.eigenvalues()};
}

Eigen::SparseMatrix<double> to_sparse(const CsrMatrix& a, double shift) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(a.nonzeros() + a.rows()));
  const auto rp = a.row_ptr();
  const auto ci = a.col_index();
  const auto vals = a.values();
  for (Index r = 0; r < a.rows(); ++r) {
    for (Index p = rp[r]; p < rp[r + 1]; ++p) t.emplace_back(r, ci[p], vals[p]);
    t.emplace_back(r, r, shift);
  }
  Eigen::SparseMatrix<double> s(a.rows(), a.cols());
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  const double s = v.sum();
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  const bool flip = std::abs(s) > 1e-8 * std::sqrt(static_cast<double>(v.size())) ? s < 0.0
                                                                                   : v[arg] < 0.0;
  if (flip) v = -v;
}

}  // namespace

EigenBasis smallest_eigs(const CsrMatrix& a, int m, const EigOptions& options) {
  const Index n = a.rows();
  if (a.cols() != n) throw InvalidParam("smallest_eigs: operator must be square");
  if (m < 1 || m > n) {
    throw InvalidParam("smallest_eigs: m=" + std::to_string(m) + " outside [1, " +
                       std::to_string(n) + "]");
  }
  const Index block = std::min<Index>(n, m + std::max(options.block_guard, m / 4));
  const double upper = gershgorin_upper(a);

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(n, block);
  for (Index j = 0; j < block; ++j) {
    for (Index i = 0; i < n; ++i) x(i, j) = normal(rng);
  }

  Eigen::MatrixXd locked(n, 0);
  std::vector<double> locked_vals;
  Ritz ritz = rayleigh_ritz(a, orthonormal_columns(x));

  EigenBasis out;
  out.requested = m;
  Index it = 0;
  Index last_lock = 0;
  // Shift-invert takes over when the filter stalls on a tight cluster.
  std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> inverse;
  while (true) {
    // Lock the leading converged Ritz pairs.
    const Index active = ritz.x.cols();
    const Index wanted = m - static_cast<Index>(locked_vals.size());
    Index conv = 0;
    while (conv < std::min(active, wanted)) {
      const double theta = ritz.theta[conv];
      const double res = (ritz.ax.col(conv) - theta * ritz.x.col(conv)).norm();
      if (res > options.tol * std::max(1.0, std::abs(theta))) break;
      ++conv;
    }
    if (conv > 0) {
      last_lock = it;
      locked.conservativeResize(n, locked.cols() + conv);
      locked.rightCols(conv) = ritz.x.leftCols(conv);
      for (Index i = 0; i < conv; ++i) locked_vals.push_back(ritz.theta[i]);
    }
    if (static_cast<Index>(locked_vals.size()) >= m || it >= options.max_iter) break;
    if (conv == active) break;  // whole space exhausted

    const Index rest = active - conv;
    Eigen::MatrixXd xa = ritz.x.rightCols(rest);
    const double lo = ritz.theta[active - 1];
    const double floor = ritz.theta[conv];
    Eigen::MatrixXd y;
    if (!inverse && it - last_lock >= options.stall_iterations) {
      inverse = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>(
          to_sparse(a, 1e-12 * std::max(upper, 1.0)));
      if (inverse->info() != Eigen::Success) inverse.reset();
    }
    if (inverse) {
      y = inverse->solve(xa);
    } else if (lo < upper * (1.0 - 1e-12) && lo > floor) {
      y = chebyshev_filter(a, xa, options.filter_degree, lo, upper, floor);
    } else {
      Eigen::MatrixXd ay(n, xa.cols());
      a.multiply(xa, ay);
      y = upper * xa - ay;
    }
    project_out(locked, y);
    ritz = rayleigh_ritz(a, orthonormal_columns(y));
    ++it;
  }

  const int k = static_cast<int>(std::min<Index>(m, static_cast<Index>(locked_vals.size())));
  out.iterations = it;
  out.vectors = locked.leftCols(k);
  out.values.resize(k);
  for (int i = 0; i < k; ++i) out.values[i] = locked_vals[static_cast<std::size_t>(i)];

  // Locking order can interleave slightly; keep values ascending.
  std::vector<int> order(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int l, int r) { return out.values[l] < out.values[r]; });
  Eigen::MatrixXd sorted_vecs(n, k);
  Eigen::VectorXd sorted_vals(k);
  for (int i = 0; i < k; ++i) {
    sorted_vecs.col(i) = out.vectors.col(order[static_cast<std::size_t>(i)]);
    sorted_vals[i] = out.values[order[static_cast<std::size_t>(i)]];
    fix_sign(sorted_vecs.col(i));
  }
  out.vectors = std::move(sorted_vecs);
  out.values = std::move(sorted_vals);
  return out;
}

double max_eigen_residual(const CsrMatrix& a, const EigenBasis& basis) {
  Eigen::MatrixXd av(basis.vectors.rows(), basis.vectors.cols());
  a.multiply(basis.vectors, av);
  double worst = 0.0;
  for (Index i = 0; i < basis.vectors.cols(); ++i) {
    worst = std::max(worst, (av.col(i) - basis.values[i] * basis.vectors.col(i)).norm());
  }
  return worst;
}

GramSchmidtResult gram_schmidt(const Eigen::MatrixXd& v, double drop_tol) {
  GramSchmidtResult out;
  out.source_cols = v.cols();
  out.q.resize(v.rows(), v.cols());
  Index kept = 0;
  Eigen::VectorXd w(v.rows());
  for (Index j = 0; j < v.cols(); ++j) {
    w = v.col(j);
    const double before = w.norm();
    if (before == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass) {
      for (Index i = 0; i < kept; ++i) w -= out.q.col(i).dot(w) * out.q.col(i);
    }
    const double after = w.norm();
    if (after < drop_tol * before) continue;
    out.q.col(kept) = w / after;
    out.kept.push_back(static_cast<int>(j));
    ++kept;
  }
  out.q.conservativeResize(v.rows(), kept);
  return out;
}

}  // namespace rwfast

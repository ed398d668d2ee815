#pragma once

// Dense reference computations used as test oracles. Everything here is
// rebuilt from the raw image so it shares no code with the library solvers.

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rwfast/image.hpp"

namespace oracle {

using rwfast::Index;

inline rwfast::Image image_2d(Index w, Index h, std::vector<double> values) {
  rwfast::Image img;
  img.dims.extents = {w, h};
  img.spacing = {1.0, 1.0};
  img.intensities = std::move(values);
  return img;
}

inline rwfast::Image path3() { return image_2d(3, 1, {0.5, 0.5, 0.5}); }

inline rwfast::Image random_image(Index w, Index h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(w * h));
  for (auto& x : v) x = u(rng);
  return image_2d(w, h, std::move(v));
}

/// Dense weight matrix of a 2D or 3D axial lattice.
inline Eigen::MatrixXd weights(const rwfast::Image& img, double beta) {
  const auto& e = img.dims.extents;
  const Index nx = e[0];
  const Index ny = e.size() > 1 ? e[1] : 1;
  const Index nz = e.size() > 2 ? e[2] : 1;
  const Index n = nx * ny * nz;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  auto id = [&](Index x, Index y, Index z) { return x + nx * (y + ny * z); };
  auto link = [&](Index a, Index b) {
    const double v =
        std::max(std::exp(-beta * std::abs(img.intensities[a] - img.intensities[b])), 1e-8);
    w(a, b) = v;
    w(b, a) = v;
  };
  for (Index z = 0; z < nz; ++z) {
    for (Index y = 0; y < ny; ++y) {
      for (Index x = 0; x < nx; ++x) {
        if (x + 1 < nx) link(id(x, y, z), id(x + 1, y, z));
        if (y + 1 < ny) link(id(x, y, z), id(x, y + 1, z));
        if (z + 1 < nz) link(id(x, y, z), id(x, y, z + 1));
      }
    }
  }
  return w;
}

inline Eigen::MatrixXd laplacian(const Eigen::MatrixXd& w) {
  Eigen::MatrixXd l = -w;
  l.diagonal() = w.rowwise().sum();
  return l;
}

inline Eigen::MatrixXd normalized_laplacian(const Eigen::MatrixXd& w) {
  const Eigen::VectorXd s = w.rowwise().sum().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd l = s.asDiagonal() * laplacian(w) * s.asDiagonal();
  l.diagonal().setOnes();
  return l;
}

/// Random walker by a dense direct solve. Normalized mode poses the system on
/// D^{1/2}-scaled unknowns. Rows are clamped and renormalized at the end.
inline Eigen::MatrixXd random_walker(const Eigen::MatrixXd& w, bool normalized,
                                     const std::vector<std::pair<Index, int>>& seeds, int k,
                                     double gamma, const Eigen::MatrixXd* priors) {
  const Index n = w.rows();
  const Eigen::MatrixXd l = normalized ? normalized_laplacian(w) : laplacian(w);
  const Eigen::VectorXd d =
      normalized ? Eigen::VectorXd(w.rowwise().sum().cwiseSqrt()) : Eigen::VectorXd::Ones(n);
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  for (const auto& [x, lab] : seeds) label[x] = lab;
  std::vector<Index> free_ids, seed_ids;
  for (Index x = 0; x < n; ++x) (label[x] >= 0 ? seed_ids : free_ids).push_back(x);
  const Index nf = static_cast<Index>(free_ids.size());
  const Index ns = static_cast<Index>(seed_ids.size());
  Eigen::MatrixXd lnn(nf, nf), b(ns, nf);
  for (Index i = 0; i < nf; ++i) {
    for (Index j = 0; j < nf; ++j) lnn(i, j) = l(free_ids[i], free_ids[j]);
  }
  for (Index i = 0; i < ns; ++i) {
    for (Index j = 0; j < nf; ++j) b(i, j) = l(seed_ids[i], free_ids[j]);
  }
  Eigen::MatrixXd us = Eigen::MatrixXd::Zero(ns, k);
  for (Index i = 0; i < ns; ++i) us(i, label[seed_ids[i]]) = d[seed_ids[i]];
  Eigen::MatrixXd rhs = -b.transpose() * us;
  if (gamma > 0.0) {
    for (Index i = 0; i < nf; ++i) rhs.row(i) += gamma * d[free_ids[i]] * priors->row(free_ids[i]);
  }
  lnn.diagonal().array() += gamma;
  const Eigen::MatrixXd xn = lnn.fullPivLu().solve(rhs);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(n, k);
  for (Index i = 0; i < ns; ++i) u(seed_ids[i], label[seed_ids[i]]) = 1.0;
  for (Index i = 0; i < nf; ++i) u.row(free_ids[i]) = xn.row(i) / d[free_ids[i]];
  for (Index x = 0; x < n; ++x) {
    u.row(x) = u.row(x).cwiseMax(0.0);
    u.row(x) /= u.row(x).sum();
  }
  return u;
}

/// Largest principal angle (radians) between the column spans of a and b,
/// both with orthonormal columns.
inline double max_principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.transpose() * b);
  const double smallest = svd.singularValues().minCoeff();
  return std::acos(std::min(1.0, smallest));
}

/// Random row-stochastic N x K matrix.
inline Eigen::MatrixXd random_priors(Index n, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Eigen::MatrixXd p(n, k);
  for (Index x = 0; x < n; ++x) {
    for (int l = 0; l < k; ++l) p(x, l) = u(rng);
    p.row(x) /= p.row(x).sum();
  }
  return p;
}

}  // namespace oracle

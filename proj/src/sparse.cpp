#include "rwfast/sparse.hpp"

#include <algorithm>

#include "rwfast/errors.hpp"

namespace rwfast {

CsrMatrix CsrMatrix::from_triplets(Index rows, Index cols, std::vector<Triplet> triplets) {
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  CsrMatrix m(rows, cols);
  m.col_idx_.reserve(triplets.size());
  m.values_.reserve(triplets.size());
  std::vector<Index> counts(static_cast<std::size_t>(rows), 0);
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
      throw IndexError("triplet out of range");
    }
    if (!m.col_idx_.empty() && i > 0 && triplets[i - 1].row == t.row &&
        triplets[i - 1].col == t.col) {
      m.values_.back() += t.value;
      continue;
    }
    m.col_idx_.push_back(t.col);
    m.values_.push_back(t.value);
    ++counts[static_cast<std::size_t>(t.row)];
  }
  for (Index r = 0; r < rows; ++r) m.row_ptr_[r + 1] = m.row_ptr_[r] + counts[r];
  return m;
}

CsrMatrix CsrMatrix::identity(Index n) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) t.push_back({i, i, 1.0});
  return from_triplets(n, n, std::move(t));
}

double CsrMatrix::coeff(Index r, Index c) const {
  const auto begin = col_idx_.begin() + row_ptr_[r];
  const auto end = col_idx_.begin() + row_ptr_[r + 1];
  const auto it = std::lower_bound(begin, end, c);
  if (it == end || *it != c) return 0.0;
  return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

Eigen::VectorXd CsrMatrix::diagonal() const {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(std::min(rows_, cols_));
  for (Index r = 0; r < d.size(); ++r) d[r] = coeff(r, r);
  return d;
}

Eigen::MatrixXd CsrMatrix::to_dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows_, cols_);
  for (Index r = 0; r < rows_; ++r) {
    for (Index p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) d(r, col_idx_[p]) = values_[p];
  }
  return d;
}

void CsrMatrix::multiply(const Eigen::Ref<const Eigen::MatrixXd>& x,
                         Eigen::Ref<Eigen::MatrixXd> y) const {
  // Column-major operands: walk columns outermost to stay cache friendly.
  for (Index c = 0; c < x.cols(); ++c) {
    const double* xc = x.col(c).data();
    double* yc = y.col(c).data();
    for (Index r = 0; r < rows_; ++r) {
      double acc = 0.0;
      for (Index p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) acc += values_[p] * xc[col_idx_[p]];
      yc[r] = acc;
    }
  }
}

Eigen::MatrixXd CsrMatrix::operator*(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  Eigen::MatrixXd y(rows_, x.cols());
  multiply(x, y);
  return y;
}

CsrMatrix CsrMatrix::select(std::span<const Index> row_ids, std::span<const Index> col_ids) const {
  // Map original column -> new column, -1 if dropped.
  std::vector<Index> col_map(static_cast<std::size_t>(cols_), -1);
  for (std::size_t j = 0; j < col_ids.size(); ++j) col_map[col_ids[j]] = static_cast<Index>(j);
  CsrMatrix out(static_cast<Index>(row_ids.size()), static_cast<Index>(col_ids.size()));
  for (std::size_t i = 0; i < row_ids.size(); ++i) {
    const Index r = row_ids[i];
    for (Index p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      const Index c = col_map[col_idx_[p]];
      if (c < 0) continue;
      out.col_idx_.push_back(c);
      out.values_.push_back(values_[p]);
    }
    out.row_ptr_[i + 1] = static_cast<Index>(out.col_idx_.size());
  }
  return out;
}

CsrMatrix CsrMatrix::scaled(const Eigen::VectorXd& left, const Eigen::VectorXd& right) const {
  CsrMatrix out = *this;
  for (Index r = 0; r < rows_; ++r) {
    for (Index p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      out.values_[p] *= left[r] * right[col_idx_[p]];
    }
  }
  return out;
}

CsrMatrix CsrMatrix::shifted(double shift) const {
  if (rows_ != cols_) throw InvalidParam("shift requires a square matrix");
  std::vector<Triplet> t;
  t.reserve(values_.size() + static_cast<std::size_t>(rows_));
  for (Index r = 0; r < rows_; ++r) {
    for (Index p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) t.push_back({r, col_idx_[p], values_[p]});
    t.push_back({r, r, shift});
  }
  return from_triplets(rows_, cols_, std::move(t));
}

}  // namespace rwfast

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace rwfast {

using Index = std::int64_t;

/// Compressed-row matrix with sorted column indices. Symmetric matrices are
/// stored with both triangles.
class CsrMatrix {
 public:
  struct Triplet {
    Index row;
    Index col;
    double value;
  };

  CsrMatrix() = default;
  CsrMatrix(Index rows, Index cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  /// Duplicate (row, col) entries are summed.
  static CsrMatrix from_triplets(Index rows, Index cols, std::vector<Triplet> triplets);
  static CsrMatrix identity(Index n);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index nonzeros() const { return static_cast<Index>(values_.size()); }

  std::span<const Index> row_ptr() const { return row_ptr_; }
  std::span<const Index> col_index() const { return col_idx_; }
  std::span<const double> values() const { return values_; }

  /// Entry (r, c) or 0 if not stored.
  double coeff(Index r, Index c) const;
  Eigen::VectorXd diagonal() const;
  Eigen::MatrixXd to_dense() const;

  /// y = A x, one column at a time.
  void multiply(const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::Ref<Eigen::MatrixXd> y) const;
  Eigen::MatrixXd operator*(const Eigen::Ref<const Eigen::MatrixXd>& x) const;

  /// Submatrix selecting `row_ids` x `col_ids` (both strictly ascending).
  CsrMatrix select(std::span<const Index> row_ids, std::span<const Index> col_ids) const;

  /// diag(left) * A * diag(right).
  CsrMatrix scaled(const Eigen::VectorXd& left, const Eigen::VectorXd& right) const;
  /// A + shift * I (square only).
  CsrMatrix shifted(double shift) const;

  bool operator==(const CsrMatrix&) const = default;

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Index> row_ptr_{0};
  std::vector<Index> col_idx_;
  std::vector<double> values_;
};

}  // namespace rwfast

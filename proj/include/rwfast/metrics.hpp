#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rwfast/image.hpp"

namespace rwfast {

struct DiceScores {
  std::vector<double> per_label;
  double mean = 0.0;
};

/// Per-label 2|A_k n B_k| / (|A_k| + |B_k|) for labels 0..K-1; a label absent
/// from both maps scores 1.
DiceScores dice(const LabelMap& a, const LabelMap& b, int labels);

/// Pooled overlap over the foreground labels 1..K-1 (label 0 is background):
/// 2 sum_k |A_k n B_k| / sum_k (|A_k| + |B_k|); 1 when both sums are empty.
double mean_overlap(const LabelMap& a, const LabelMap& b, int labels);

/// Mean Euclidean distance between two N x d vector fields over the voxels
/// where `mask` is true (all voxels when the mask is empty).
double mean_endpoint_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                           const std::vector<bool>& mask = {});

}  // namespace rwfast

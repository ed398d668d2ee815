#include "rwfast/metrics.hpp"

#include "rwfast/errors.hpp"

namespace rwfast {

namespace {

void check_pair(const LabelMap& a, const LabelMap& b, int labels) {
  if (!(a.dims == b.dims) || a.labels.size() != b.labels.size()) {
    throw DimsMismatch("label maps differ in dims");
  }
  if (labels < 1) throw InvalidParam("K must be >= 1");
}

}  // namespace

DiceScores dice(const LabelMap& a, const LabelMap& b, int labels) {
  check_pair(a, b, labels);
  std::vector<double> inter(labels, 0.0);
  std::vector<double> total(labels, 0.0);
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const int la = a.labels[i];
    const int lb = b.labels[i];
    if (la < labels) total[la] += 1.0;
    if (lb < labels) total[lb] += 1.0;
    if (la == lb && la < labels) inter[la] += 1.0;
  }
  DiceScores out;
  for (int k = 0; k < labels; ++k) {
    out.per_label.push_back(total[k] == 0.0 ? 1.0 : 2.0 * inter[k] / total[k]);
    out.mean += out.per_label.back();
  }
  out.mean /= labels;
  return out;
}

double mean_overlap(const LabelMap& a, const LabelMap& b, int labels) {
  check_pair(a, b, labels);
  double inter = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const int la = a.labels[i];
    const int lb = b.labels[i];
    const bool fa = la >= 1 && la < labels;
    const bool fb = lb >= 1 && lb < labels;
    total += static_cast<double>(fa) + static_cast<double>(fb);
    if (fa && la == lb) inter += 1.0;
  }
  return total == 0.0 ? 1.0 : 2.0 * inter / total;
}

double mean_endpoint_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                           const std::vector<bool>& mask) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimsMismatch("field shapes differ");
  if (!mask.empty() && static_cast<Index>(mask.size()) != a.rows()) {
    throw DimsMismatch("mask size differs from field");
  }
  double sum = 0.0;
  Index count = 0;
  for (Index x = 0; x < a.rows(); ++x) {
    if (!mask.empty() && !mask[x]) continue;
    sum += (a.row(x) - b.row(x)).norm();
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

}  // namespace rwfast

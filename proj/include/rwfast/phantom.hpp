#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rwfast/image.hpp"

namespace rwfast {

enum class PhantomKind { Blobs2d, Cells2d, Blobs3d, ShiftedPair };

PhantomKind parse_phantom_kind(const std::string& name);
std::string to_string(PhantomKind kind);

struct PhantomSpec {
  PhantomKind kind = PhantomKind::Blobs2d;
  Dims dims{{64, 64}};
  std::uint64_t seed = 1;
  double noise_sigma = 0.05;
  int regions = 3;                   // blob labels (cells: always 2)
  std::vector<Index> shift{2, 1};    // shifted_pair only
  double texture = 0.0;              // deviation of the blurred shading added to every region
};

struct Phantom {
  PhantomSpec spec;
  int labels = 0;
  Image image;
  LabelMap truth;
  // shifted_pair: moving(x) = fixed(x - shift), so the true displacement
  // from fixed to moving is +shift.
  std::optional<Image> moving;
  std::optional<LabelMap> moving_truth;
  std::optional<Eigen::MatrixXd> true_field;  // N x d
};

/// Deterministic for a fixed spec.
Phantom make_phantom(const PhantomSpec& spec);

/// Voxels at least `margin` away from every border.
std::vector<bool> interior_mask(const Dims& dims, Index margin);

/// Independent per-run seed from a master seed and a run counter.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter);

/// Up to `per_region` distinct voxels drawn uniformly from each label's
/// region of `truth`.
std::vector<std::pair<Index, int>> sample_seeds(const LabelMap& truth, int labels, int per_region,
                                                std::uint64_t rng_seed);

}  // namespace rwfast

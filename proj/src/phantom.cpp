#include "rwfast/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "rwfast/errors.hpp"

namespace rwfast {

namespace {

// Region levels stay inside [0.2, 0.8] so noise and shading rarely clip.
double level(int label, int labels) { return 0.2 + 0.6 * (label + 0.5) / labels; }

// Region levels plus optional shading: white noise blurred by a 3-tap
// binomial kernel per axis, rescaled to unit deviation.
std::vector<double> clean_intensities(const LabelMap& labels, int count, double texture,
                                      std::mt19937_64& rng) {
  const Dims& dims = labels.dims;
  const Index n = dims.count();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Index x = 0; x < n; ++x) out[x] = level(labels.labels[x], count);
  if (texture <= 0.0) return out;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> field(static_cast<std::size_t>(n));
  for (auto& v : field) v = gauss(rng);
  std::vector<double> tmp(field.size());
  for (int a = 0; a < dims.ndim(); ++a) {
    for (Index x = 0; x < n; ++x) {
      const auto c = dims.coord(x);
      const Index lo = c[a] > 0 ? x - dims.stride(a) : x;
      const Index hi = c[a] + 1 < dims.extents[a] ? x + dims.stride(a) : x;
      tmp[x] = 0.25 * field[lo] + 0.5 * field[x] + 0.25 * field[hi];
    }
    field.swap(tmp);
  }
  double sq = 0.0;
  for (double v : field) sq += v * v;
  const double scale = texture / std::sqrt(sq / static_cast<double>(n));
  for (Index x = 0; x < n; ++x) out[x] += scale * field[x];
  return out;
}

Image noisy_image(const Dims& dims, const std::vector<double>& clean, double noise,
                  std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Image img;
  img.dims = dims;
  img.spacing.assign(dims.ndim(), 1.0);
  img.intensities.resize(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double v = clean[i] + (noise > 0.0 ? noise * gauss(rng) : 0.0);
    img.intensities[i] = std::clamp(v, 0.0, 1.0);
  }
  img.raw_min = 0.0;
  img.raw_max = 1.0;
  return img;
}

// Voronoi cells of random centres under a smooth random coordinate warp.
LabelMap blob_labels(const Dims& dims, int regions, std::mt19937_64& rng) {
  const int d = dims.ndim();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> centres(regions, std::vector<double>(d));
  for (auto& c : centres) {
    for (int a = 0; a < d; ++a) c[a] = unit(rng) * static_cast<double>(dims.extents[a] - 1);
  }
  std::vector<double> amp(d), freq(d), phase(d);
  for (int a = 0; a < d; ++a) {
    amp[a] = 0.08 * static_cast<double>(dims.extents[a]) * unit(rng);
    freq[a] = (1.0 + 2.0 * unit(rng)) / static_cast<double>(dims.extents[(a + 1) % d]);
    phase[a] = 2.0 * std::numbers::pi * unit(rng);
  }
  LabelMap out{dims, std::vector<std::uint16_t>(static_cast<std::size_t>(dims.count()))};
  for (Index x = 0; x < dims.count(); ++x) {
    const auto c = dims.coord(x);
    std::vector<double> p(d);
    for (int a = 0; a < d; ++a) {
      const double other = static_cast<double>(c[(a + 1) % d]);
      p[a] = static_cast<double>(c[a]) +
             amp[a] * std::sin(2.0 * std::numbers::pi * freq[a] * other + phase[a]);
    }
    int best = 0;
    double best_d = 1e300;
    for (int k = 0; k < regions; ++k) {
      double dist = 0.0;
      for (int a = 0; a < d; ++a) dist += (p[a] - centres[k][a]) * (p[a] - centres[k][a]);
      if (dist < best_d) {
        best_d = dist;
        best = k;
      }
    }
    out.labels[x] = static_cast<std::uint16_t>(best);
  }
  return out;
}

LabelMap cell_labels(const Dims& dims, std::mt19937_64& rng) {
  const double w = static_cast<double>(dims.extents[0]);
  const double h = static_cast<double>(dims.extents[1]);
  const double r_min = std::max(2.0, std::min(w, h) / 20.0);
  const double r_max = std::max(r_min + 1.0, std::min(w, h) / 10.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  struct Circle {
    double x, y, r;
  };
  std::vector<Circle> cells;
  for (int attempt = 0; attempt < 400; ++attempt) {
    const double r = r_min + (r_max - r_min) * unit(rng);
    const double cx = r + 1.0 + (w - 2.0 * r - 2.0) * unit(rng);
    const double cy = r + 1.0 + (h - 2.0 * r - 2.0) * unit(rng);
    bool clear = true;
    for (const auto& c : cells) {
      if (std::hypot(c.x - cx, c.y - cy) < c.r + r + 2.0) clear = false;
    }
    if (clear) cells.push_back({cx, cy, r});
  }
  LabelMap out{dims, std::vector<std::uint16_t>(static_cast<std::size_t>(dims.count()), 0)};
  for (Index x = 0; x < dims.count(); ++x) {
    const auto c = dims.coord(x);
    for (const auto& cell : cells) {
      if (std::hypot(static_cast<double>(c[0]) - cell.x, static_cast<double>(c[1]) - cell.y) <=
          cell.r) {
        out.labels[x] = 1;
      }
    }
  }
  return out;
}

}  // namespace

PhantomKind parse_phantom_kind(const std::string& name) {
  if (name == "blobs2d") return PhantomKind::Blobs2d;
  if (name == "cells2d") return PhantomKind::Cells2d;
  if (name == "blobs3d") return PhantomKind::Blobs3d;
  if (name == "shifted_pair") return PhantomKind::ShiftedPair;
  throw InvalidParam("unknown phantom kind '" + name + "'");
}

std::string to_string(PhantomKind kind) {
  switch (kind) {
    case PhantomKind::Blobs2d: return "blobs2d";
    case PhantomKind::Cells2d: return "cells2d";
    case PhantomKind::Blobs3d: return "blobs3d";
    case PhantomKind::ShiftedPair: return "shifted_pair";
  }
  return "unknown";
}

Phantom make_phantom(const PhantomSpec& spec) {
  validate_dims(spec.dims);
  const bool three_d = spec.kind == PhantomKind::Blobs3d;
  if ((spec.dims.ndim() == 3) != three_d) {
    throw DimsMismatch(to_string(spec.kind) + " phantom needs " + (three_d ? "3" : "2") + " axes");
  }
  if (spec.regions < 1 || spec.regions > 1000) throw InvalidParam("regions must be in [1, 1000]");
  if (!(spec.noise_sigma >= 0.0)) throw InvalidParam("noise sigma must be >= 0");
  std::mt19937_64 rng(spec.seed);
  Phantom ph;
  ph.spec = spec;
  if (spec.kind == PhantomKind::Cells2d) {
    ph.labels = 2;
    ph.truth = cell_labels(spec.dims, rng);
  } else {
    ph.labels = spec.regions;
    ph.truth = blob_labels(spec.dims, spec.regions, rng);
  }
  if (!(spec.texture >= 0.0)) throw InvalidParam("texture must be >= 0");
  const std::vector<double> clean = clean_intensities(ph.truth, ph.labels, spec.texture, rng);
  ph.image = noisy_image(spec.dims, clean, spec.noise_sigma, rng);

  if (spec.kind == PhantomKind::ShiftedPair) {
    if (static_cast<int>(spec.shift.size()) != spec.dims.ndim()) {
      throw DimsMismatch("shift must have one component per axis");
    }
    LabelMap moved{spec.dims, ph.truth.labels};
    std::vector<double> moved_clean(clean.size());
    for (Index x = 0; x < spec.dims.count(); ++x) {
      auto c = spec.dims.coord(x);
      for (int a = 0; a < spec.dims.ndim(); ++a) {
        c[a] = std::clamp<Index>(c[a] - spec.shift[a], 0, spec.dims.extents[a] - 1);
      }
      moved.labels[x] = ph.truth.labels[spec.dims.flat(c)];
      moved_clean[x] = clean[spec.dims.flat(c)];
    }
    ph.moving = noisy_image(spec.dims, moved_clean, spec.noise_sigma, rng);
    ph.moving_truth = std::move(moved);
    Eigen::MatrixXd field(spec.dims.count(), spec.dims.ndim());
    for (int a = 0; a < spec.dims.ndim(); ++a) {
      field.col(a).setConstant(static_cast<double>(spec.shift[a]));
    }
    ph.true_field = std::move(field);
  }
  return ph;
}

std::vector<bool> interior_mask(const Dims& dims, Index margin) {
  std::vector<bool> mask(static_cast<std::size_t>(dims.count()), true);
  for (Index x = 0; x < dims.count(); ++x) {
    const auto c = dims.coord(x);
    for (int a = 0; a < dims.ndim(); ++a) {
      if (c[a] < margin || c[a] > dims.extents[a] - 1 - margin) mask[x] = false;
    }
  }
  return mask;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
  // splitmix64 finalizer over the pair.
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<std::pair<Index, int>> sample_seeds(const LabelMap& truth, int labels, int per_region,
                                                std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  std::vector<std::vector<Index>> regions(labels);
  for (Index x = 0; x < truth.size(); ++x) {
    if (truth.labels[x] < labels) regions[truth.labels[x]].push_back(x);
  }
  std::vector<std::pair<Index, int>> seeds;
  for (int k = 0; k < labels; ++k) {
    auto& r = regions[k];
    const std::size_t take = std::min<std::size_t>(r.size(), static_cast<std::size_t>(per_region));
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, r.size() - 1);
      std::swap(r[i], r[pick(rng)]);
      seeds.emplace_back(r[i], k);
    }
  }
  return seeds;
}

}  // namespace rwfast

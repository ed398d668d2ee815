#include "rwfast/registration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "rwfast/errors.hpp"
#include "rwfast/fast_rw.hpp"
#include "rwfast/refresh.hpp"
#include "rwfast/rw_solver.hpp"

namespace rwfast {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

Index clamp_flat(const Dims& dims, const std::vector<Index>& c) {
  Index flat = 0;
  for (int a = 0; a < dims.ndim(); ++a) {
    flat += std::clamp<Index>(c[a], 0, dims.extents[a] - 1) * dims.stride(a);
  }
  return flat;
}

// All integer offsets with every component in [-r, r], first axis fastest.
std::vector<std::vector<Index>> box_offsets(int ndim, int r) {
  std::vector<std::vector<Index>> out{{}};
  for (int a = 0; a < ndim; ++a) {
    std::vector<std::vector<Index>> next;
    for (Index o = -r; o <= r; ++o) {
      for (const auto& prefix : out) {
        auto v = prefix;
        v.push_back(o);
        next.push_back(std::move(v));
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace

void DisplacementGrid::validate() const {
  if (extents.empty()) throw InvalidParam("displacement grid needs at least one axis");
  for (int e : extents) {
    if (e < 1 || e % 2 == 0) throw InvalidParam("displacement grid extents must be odd");
  }
  if (step < 1) throw InvalidParam("displacement grid step must be >= 1");
}

int DisplacementGrid::labels() const {
  int k = 1;
  for (int e : extents) k *= e;
  return k;
}

int DisplacementGrid::zero_label() const {
  int label = 0;
  int stride = 1;
  for (int e : extents) {
    label += (e / 2) * stride;
    stride *= e;
  }
  return label;
}

std::vector<double> DisplacementGrid::vector(int label) const {
  if (label < 0 || label >= labels()) throw IndexError("displacement label out of range");
  std::vector<double> v;
  for (int e : extents) {
    v.push_back(static_cast<double>((label % e - e / 2) * step));
    label /= e;
  }
  return v;
}

Eigen::MatrixXd DisplacementGrid::table() const {
  Eigen::MatrixXd t(labels(), ndim());
  for (int k = 0; k < labels(); ++k) {
    const auto v = vector(k);
    for (int a = 0; a < ndim(); ++a) t(k, a) = v[a];
  }
  return t;
}

void save_displacement_field(const DisplacementField& field, const std::filesystem::path& path) {
  const int d = static_cast<int>(field.vectors.cols());
  std::vector<float> data(static_cast<std::size_t>(field.size()) * d);
  for (Index x = 0; x < field.size(); ++x) {
    for (int a = 0; a < d; ++a) data[x * d + a] = static_cast<float>(field.vectors(x, a));
  }
  RawjHeader h{field.dims, std::vector<double>(field.dims.ndim(), 1.0), "f32", d};
  write_rawj(path, h, std::as_bytes(std::span<const float>(data)));
}

DisplacementField load_displacement_field(const std::filesystem::path& path) {
  std::vector<std::byte> payload;
  const RawjHeader h = read_rawj(path, payload);
  if (h.dtype != "f32") throw FormatError("displacement RAWJ must be f32");
  DisplacementField f;
  f.dims = h.dims;
  f.vectors.resize(h.dims.count(), h.channels);
  const auto* data = reinterpret_cast<const float*>(payload.data());
  for (Index x = 0; x < f.size(); ++x) {
    for (int a = 0; a < h.channels; ++a) f.vectors(x, a) = data[x * h.channels + a];
  }
  return f;
}

ProbabilityField similarity_priors(const Image& fixed, const Image& moving,
                                   const DisplacementGrid& grid, int patch_radius,
                                   double sharpness) {
  if (!(fixed.dims == moving.dims)) throw DimsMismatch("fixed and moving dims differ");
  grid.validate();
  if (grid.ndim() != fixed.dims.ndim()) throw DimsMismatch("grid and image dimensionality differ");
  if (patch_radius < 0) throw InvalidParam("patch radius must be >= 0");
  if (!(sharpness > 0.0)) throw InvalidParam("prior sharpness must be > 0");
  const Dims& dims = fixed.dims;
  const Index n = dims.count();
  const int k = grid.labels();
  const int d = dims.ndim();
  const auto offsets = box_offsets(d, patch_radius);
  const double inv_patch = 1.0 / static_cast<double>(offsets.size());

  Eigen::MatrixXd s(n, k);
  std::vector<Index> a(d);
  std::vector<Index> b(d);
  for (int l = 0; l < k; ++l) {
    const auto shift = grid.vector(l);
    for (Index x = 0; x < n; ++x) {
      const auto c = dims.coord(x);
      double acc = 0.0;
      for (const auto& o : offsets) {
        for (int ax = 0; ax < d; ++ax) {
          a[ax] = c[ax] + o[ax];
          b[ax] = a[ax] + static_cast<Index>(shift[ax]);
        }
        acc += std::abs(fixed.at(clamp_flat(dims, a)) - moving.at(clamp_flat(dims, b)));
      }
      s(x, l) = acc * inv_patch;
    }
  }

  ProbabilityField p;
  p.dims = dims;
  const double sigma = s.mean();
  if (sigma <= 0.0) {
    p.values = Eigen::MatrixXd::Constant(n, k, 1.0 / k);
    return p;
  }
  p.values.resize(n, k);
  const double scale = sharpness / (sigma * sigma);
  for (Index x = 0; x < n; ++x) {
    // Shift by the row minimum so the best label never underflows.
    const double s_min = s.row(x).minCoeff();
    for (int l = 0; l < k; ++l) {
      p.values(x, l) = std::exp(-scale * (s(x, l) * s(x, l) - s_min * s_min));
    }
    p.values.row(x) /= p.values.row(x).sum();
  }
  return p;
}

DisplacementField expected_displacement(const ProbabilityField& u, const DisplacementGrid& grid) {
  if (u.labels() != grid.labels()) throw DimsMismatch("probabilities and grid disagree on K");
  DisplacementField f;
  f.dims = u.dims;
  f.vectors = u.values * grid.table();
  return f;
}

LabelMap warp_labels(const LabelMap& labels, const DisplacementField& field) {
  if (!(labels.dims == field.dims)) throw DimsMismatch("labels and field dims differ");
  const Dims& dims = labels.dims;
  LabelMap out{dims, std::vector<std::uint16_t>(labels.labels.size())};
  std::vector<Index> c;
  for (Index x = 0; x < dims.count(); ++x) {
    c = dims.coord(x);
    for (int a = 0; a < dims.ndim(); ++a) {
      c[a] += static_cast<Index>(std::lround(field.vectors(x, a)));
    }
    out.labels[x] = labels.labels[clamp_flat(dims, c)];
  }
  return out;
}

RegistrationResult register_images(const Image& fixed, const Image& moving,
                                   const DisplacementGrid& grid,
                                   const RegistrationOptions& options,
                                   std::shared_ptr<const SpectralPack> pack) {
  const auto t0 = Clock::now();
  RegistrationResult result;
  const ProbabilityField priors = similarity_priors(fixed, moving, grid, options.patch_radius, options.prior_sharpness);
  result.report.prior_seconds = seconds_since(t0);
  const auto t1 = Clock::now();

  const Index n = fixed.size();
  const int k = grid.labels();
  LabelProblem problem;
  problem.labels = k;
  problem.gamma = options.gamma;
  problem.seeds = SeedPartition(n, options.landmarks);
  problem.priors = priors.values;

  const bool fast = options.solver == RegistrationSolver::Fast || options.aggregation.has_value();
  if (!fast) {
    const WeightedLatticeGraph graph = build_graph(fixed, options.beta);
    result.probabilities =
        solve_basic(laplacian(graph, LaplacianMode::Normalized), problem, options.cg);
    result.report.clusters = n;
  } else {
    if (!pack) throw InvalidParam("the fast and aggregated paths need a spectral pack");
    if (!(pack->dims == fixed.dims)) throw ImageMismatch("pack was not built for this image");
    std::unique_ptr<ColumnBasis> basis;
    Laplacian lap;
    if (pack->beta == options.beta) {
      basis = std::make_unique<PackBasis>(*pack);
      lap = laplacian(build_graph(fixed, options.beta), LaplacianMode::Normalized);
    } else {
      auto refreshed = std::make_unique<RefreshedPack>(refresh(pack, fixed, options.beta));
      lap = refreshed->laplacian();
      basis = std::move(refreshed);
    }

    if (!options.aggregation) {
      FastSolveOptions fo;
      fo.m_use = options.m_use;
      if (options.adaptive) {
        const MSelection sel = select_m(*basis, lap, problem, options.policy, grid.extents);
        fo.m_use = sel.m_use;
        result.report.adaptive_passed = sel.passed;
      }
      FastSolveReport rep;
      result.probabilities = solve_fast(*basis, lap, problem, fo, &rep);
      result.report.m_use = rep.m_use;
      result.report.clusters = n;
    } else {
      const AggregationOptions& ao = *options.aggregation;
      const WeightedLatticeGraph graph = build_graph(fixed, options.beta);
      const Aggregation agg = build_aggregation(priors, graph, ao.max_radius, ao.similarity_tol);
      const Index nb = agg.clusters();
      result.report.clusters = nb;
      const Laplacian lap_bar = aggregate_laplacian(agg);

      std::vector<std::pair<Index, int>> coarse_seeds;
      for (const auto& [x, label] : options.landmarks) {
        const Index y = agg.cluster_of[x];
        bool known = false;
        for (const auto& [cy, cl] : coarse_seeds) {
          if (cy != y) continue;
          if (cl != label) throw InvalidParam("landmarks with different labels share a cluster");
          known = true;
        }
        if (!known) coarse_seeds.emplace_back(y, label);
      }
      LabelProblem coarse;
      coarse.labels = k;
      coarse.gamma = options.gamma;
      coarse.seeds = SeedPartition(nb, coarse_seeds);
      coarse.priors = aggregate_priors(priors.values, agg);

      std::unique_ptr<ColumnBasis> coarse_basis;
      if (ao.basis == AggregateBasis::Direct) {
        const int m = static_cast<int>(std::min<Index>(basis->cols(), nb));
        EigenBasis eb = smallest_eigs(lap_bar.matrix, m);
        coarse_basis = std::make_unique<DenseBasis>(std::move(eb.vectors), std::move(eb.values));
      } else {
        const CoarsenVariant variant =
            ao.basis == AggregateBasis::Delta ? CoarsenVariant::Delta : CoarsenVariant::Naive;
        CoarseBasis cb = coarsen_basis(*basis, agg, graph, variant);
        coarse_basis = std::make_unique<DenseBasis>(std::move(cb.vectors), std::move(cb.values));
      }

      FastSolveOptions fo;
      fo.m_use = options.m_use > 0 ? std::min(options.m_use, coarse_basis->cols()) : 0;
      if (options.adaptive) {
        const MSelection sel =
            select_m(*coarse_basis, lap_bar, coarse, options.policy, grid.extents);
        fo.m_use = sel.m_use;
        result.report.adaptive_passed = sel.passed;
      }
      FastSolveReport rep;
      const ProbabilityField u_bar = solve_fast(*coarse_basis, lap_bar, coarse, fo, &rep);
      result.probabilities = propagate(u_bar.values, agg);
      result.report.m_use = rep.m_use;
    }
  }
  result.probabilities.dims = fixed.dims;
  result.field = expected_displacement(result.probabilities, grid);
  result.report.solve_seconds = seconds_since(t1);
  result.report.total_seconds = seconds_since(t0);
  return result;
}

}  // namespace rwfast

// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rwfast/adaptive.hpp"
#include "rwfast/aggregation.hpp"
#include "rwfast/bench.hpp"
#include "rwfast/fast_rw.hpp"
#include "rwfast/linalg.hpp"
#include "rwfast/metrics.hpp"
#include "rwfast/phantom.hpp"
#include "rwfast/refresh.hpp"
#include "rwfast/registration.hpp"
#include "rwfast/rw_solver.hpp"
#include "rwfast/spectral_pack.hpp"

using namespace rwfast;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

Phantom blobs(Index w, Index h, std::uint64_t seed, int regions) {
  PhantomSpec s;
  s.dims = Dims{{w, h}};
  s.seed = seed;
  s.regions = regions;
  return make_phantom(s);
}

LabelProblem problem_for(const Image& image, const std::vector<std::pair<Index, int>>& seeds,
                         int k, double gamma) {
  LabelProblem p;
  p.labels = k;
  p.seeds = SeedPartition(image.size(), seeds);
  p.gamma = gamma;
  if (gamma > 0.0) p.priors = gaussian_seed_priors(image, seeds, k);
  return p;
}

double dsc(const ProbabilityField& u, const LabelMap& truth, int k) {
  ProbabilityField v = u;
  v.dims = truth.dims;
  return dice(hard_labels(v), truth, k).mean;
}

Outcome oracle_exactness() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  PrecomputeOptions po;
  po.eig.tol = 1e-12;
  CgOptions cg;
  cg.tol = 1e-13;
  const int trials = 24;
  for (int t = 0; t < trials; ++t) {
    const Phantom ph = blobs(8, 8, 1000 + t, 2 + t % 3);
    const int k = ph.labels;
    const double gamma = t % 2 == 0 ? 0.0 : 0.05;
    const auto seeds = sample_seeds(ph.truth, k, 2, 2000 + t);
    const double beta = 20.0 + 10.0 * (t % 5);
    const LabelProblem prob = problem_for(ph.image, seeds, k, gamma);
    const SpectralPack pack = precompute(ph.image, beta, 64, po);
    if (pack.size() != 64) return {false, "pack stopped early"};
    const Laplacian lap = laplacian(build_graph(ph.image, beta), LaplacianMode::Normalized);
    const auto fast = solve_fast(PackBasis(pack), lap, prob);
    const auto basic = solve_basic(lap, prob, cg);
    const Eigen::MatrixXd dense = oracle::random_walker(
        oracle::weights(ph.image, beta), true, seeds, k, gamma, prob.priors ? &*prob.priors : nullptr);
    worst = std::max({worst, (fast.values - basic.values).cwiseAbs().maxCoeff(),
                      (basic.values - dense).cwiseAbs().maxCoeff(),
                      (fast.values - dense).cwiseAbs().maxCoeff()});
  }
  const double secs = since(t0);
  return {worst <= 1e-5 && secs < 5.0,
          std::to_string(trials) + " phantoms N=64, max |dU| " + fmt("%.2e", worst) + ", " +
              fmt("%.2f s", secs)};
}

Outcome eigensolver() {
  EigOptions eo;
  eo.tol = 1e-10;
  double worst_value = 0.0;
  double worst_angle = 0.0;
  std::vector<Image> images{oracle::path3()};
  for (int t = 0; t < 10; ++t) {
    images.push_back(oracle::random_image(4 + t % 7, 5 + (3 * t) % 6, 300 + t));
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Image& img = images[i];
    const double beta = 10.0 + 5.0 * static_cast<double>(i);
    for (bool normalized : {true, false}) {
      const Eigen::MatrixXd w = oracle::weights(img, beta);
      const Eigen::MatrixXd l = normalized ? oracle::normalized_laplacian(w) : oracle::laplacian(w);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l);
      const int n = static_cast<int>(l.rows());
      const int m = n <= 3 ? n : std::min(10, n / 2);
      const auto lap = laplacian(build_graph(img, beta),
                                 normalized ? LaplacianMode::Normalized : LaplacianMode::Unnormalized);
      const EigenBasis eb = smallest_eigs(lap.matrix, m, eo);
      if (eb.size() != m) return {false, "eigensolver stopped early"};
      worst_value = std::max(worst_value, (eb.values - es.eigenvalues().head(m)).cwiseAbs().maxCoeff());
      if (m < n) {
        worst_angle = std::max(worst_angle,
                               oracle::max_principal_angle(eb.vectors, es.eigenvectors().leftCols(m)));
      }
    }
  }
  return {worst_value <= 1e-6 && worst_angle <= 1e-4,
          "values " + fmt("%.2e", worst_value) + ", angle " + fmt("%.2e", worst_angle)};
}

Outcome truncation_trend() {
  const Phantom ph = blobs(64, 64, 7, 3);
  const double beta = 50.0;
  const SpectralPack pack = precompute(ph.image, beta, 256);
  if (pack.size() != 256) return {false, "pack stopped early"};
  const Laplacian lap = laplacian(build_graph(ph.image, beta), LaplacianMode::Normalized);
  const PackBasis basis(pack);
  CgOptions cg;
  cg.tol = 1e-10;
  int ok = 0;
  const int trials = 50;
  for (int t = 0; t < trials; ++t) {
    const auto seeds = sample_seeds(ph.truth, ph.labels, 5, derive_seed(77, t));
    const LabelProblem prob = problem_for(ph.image, seeds, ph.labels, 0.0);
    const auto basic = solve_basic(lap, prob, cg);
    double prev = std::numeric_limits<double>::infinity();
    bool mono = true;
    for (int m : {32, 64, 128, 256}) {
      FastSolveOptions fo;
      fo.m_use = m;
      const double gap = (solve_fast(basis, lap, prob, fo).values - basic.values).norm();
      mono = mono && gap <= prev;
      prev = gap;
    }
    ok += mono;
  }
  return {ok >= 45, std::to_string(ok) + "/" + std::to_string(trials) + " trials non-increasing"};
}

Outcome adaptive_selection() {
  BenchConfig c;
  c.phantom.dims = Dims{{64, 64}};
  c.phantom.regions = 3;
  c.phantom.noise_sigma = 0.1;
  c.repetitions = 5;
  c.master_seed = 11;
  c.methods = {"fast", "adaptive"};
  c.m_values = {16, 32, 64, 128};
  c.epsilon = 0.1;
  c.seeds_per_region = 5;
  const BenchReport r = run_benchmark(c);
  std::map<int, double> fixed;
  double adaptive = 0.0;
  double m_use = 0.0;
  for (const auto& rec : r.records) {
    if (rec.method == "fast") {
      fixed[rec.m_use] += rec.dsc / c.repetitions;
    } else {
      adaptive += rec.dsc / c.repetitions;
      m_use += static_cast<double>(rec.m_use) / c.repetitions;
    }
  }
  double best = 0.0;
  for (const auto& [m, d] : fixed) best = std::max(best, d);
  return {adaptive >= best - 0.02 && m_use <= 128.0,
          "adaptive DSC " + fmt("%.4f", adaptive) + ", best fixed " + fmt("%.4f", best) +
              ", mean m_use " + fmt("%.1f", m_use)};
}

Outcome fg_monotonicity() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  int violations = 0;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Index n = 30 + t % 40;
    const int m = 4 + t % 16;
    const Index s = 2 + t % 9;
    Eigen::MatrixXd v(n, m);
    for (Index i = 0; i < v.size(); ++i) v.data()[i] = g(rng);
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(v).householderQ() *
                              Eigen::MatrixXd::Identity(n, m);
    const DenseBasis basis(q, Eigen::VectorXd::LinSpaced(m, 0.0, 1.0));
    Eigen::VectorXd u(s), p(n);
    for (Index i = 0; i < s; ++i) u[i] = g(rng) > 0.0 ? 1.0 : 0.0;
    for (Index i = 0; i < n; ++i) p[i] = std::abs(g(rng));
    const double bound = t % 3 == 0 ? std::numeric_limits<double>::infinity() : 0.2 + 0.1 * (t % 7);
    double f_prev = std::numeric_limits<double>::infinity();
    double g_prev = std::numeric_limits<double>::infinity();
    PriorResidual cache;
    for (int k = 1; k <= m; ++k) {
      const double f = seed_fit(q.topLeftCorner(s, k), u, bound);
      const double gv = prior_residual(basis, k, p, cache);
      worst = std::max({worst, f - f_prev, gv - g_prev});
      violations += (f > f_prev + 1e-12) + (gv > g_prev + 1e-12);
      f_prev = f;
      g_prev = gv;
    }
  }
  return {violations == 0,
          "100 cases, " + std::to_string(violations) + " violations, max increase " + fmt("%.1e", worst)};
}

Outcome rayleigh_refresh() {
  // (a) same beta.
  double same = 0.0;
  for (int t = 0; t < 3; ++t) {
    const Phantom ph = blobs(24, 24, 40 + t, 3);
    auto pack = std::make_shared<const SpectralPack>(precompute(ph.image, 50.0, 48));
    const auto seeds = sample_seeds(ph.truth, ph.labels, 4, t);
    const Laplacian lap = laplacian(build_graph(ph.image, 50.0), LaplacianMode::Normalized);
    for (double gamma : {0.0, 0.01}) {
      const LabelProblem prob = problem_for(ph.image, seeds, ph.labels, gamma);
      const auto direct = solve_fast(PackBasis(*pack), lap, prob);
      const RefreshedPack r = refresh(pack, ph.image, 50.0);
      const auto refreshed = solve_fast(r, r.laplacian(), prob);
      same = std::max(same, (direct.values - refreshed.values).cwiseAbs().maxCoeff());
    }
  }
  // (b) 64x64, base beta 50.
  const Phantom ph = blobs(64, 64, 3, 3);
  const int m = 128;
  auto base = std::make_shared<const SpectralPack>(precompute(ph.image, 50.0, m));
  const auto seeds = sample_seeds(ph.truth, ph.labels, 5, 9);
  const LabelProblem prob = problem_for(ph.image, seeds, ph.labels, 0.0);
  double worst_loss = -1.0;
  std::string detail;
  for (double beta : {25.0, 35.0, 70.0, 100.0}) {
    const SpectralPack direct_pack = precompute(ph.image, beta, m);
    const Laplacian lap = laplacian(build_graph(ph.image, beta), LaplacianMode::Normalized);
    const double d_direct = dsc(solve_fast(PackBasis(direct_pack), lap, prob), ph.truth, ph.labels);
    const RefreshedPack r = refresh(base, ph.image, beta);
    const double d_refresh = dsc(solve_fast(r, r.laplacian(), prob), ph.truth, ph.labels);
    worst_loss = std::max(worst_loss, d_direct - d_refresh);
    detail += " b" + fmt("%g", beta) + " " + fmt("%.3f", d_refresh) + "/" + fmt("%.3f", d_direct);
  }
  return {same <= 1e-6 && worst_loss <= 0.05,
          "same-beta " + fmt("%.1e", same) + ", worst DSC loss " + fmt("%.3f", worst_loss) +
              " (refreshed/direct:" + detail + ")"};
}

Outcome aggregation_null() {
  double worst = 0.0;
  for (int t = 0; t < 6; ++t) {
    const Phantom ph = blobs(10, 9, 60 + t, 3);
    const double beta = 40.0;
    const auto g = build_graph(ph.image, beta);
    const SpectralPack pack = precompute(ph.image, beta, 30);
    const auto seeds = sample_seeds(ph.truth, ph.labels, 2, t);
    const double gamma = t % 2 ? 0.5 : 0.0;
    LabelProblem prob = problem_for(ph.image, seeds, ph.labels, gamma);
    const Eigen::MatrixXd priors =
        prob.priors ? *prob.priors : oracle::random_priors(ph.image.size(), ph.labels, t);
    const auto direct = solve_fast(PackBasis(pack), laplacian(g, LaplacianMode::Normalized), prob);
    const Aggregation agg = build_aggregation(ProbabilityField{ph.image.dims, priors}, g, 0, 0.0);
    const CoarseBasis cb = coarsen_basis(PackBasis(pack), agg, g, CoarsenVariant::Naive);
    std::vector<std::pair<Index, int>> coarse_seeds;
    for (const auto& [x, l] : seeds) coarse_seeds.emplace_back(agg.cluster_of[x], l);
    LabelProblem coarse = prob;
    coarse.seeds = SeedPartition(agg.clusters(), coarse_seeds);
    if (prob.priors) coarse.priors = aggregate_priors(*prob.priors, agg);
    const auto u_bar = solve_fast(cb.basis(), aggregate_laplacian(agg), coarse);
    worst = std::max(worst, (propagate(u_bar.values, agg).values - direct.values).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-6, "6 cases, max |dU| " + fmt("%.2e", worst)};
}

Outcome delta_vs_naive() {
  const DisplacementGrid grid{{7, 7}, 1};
  double naive = 0.0, delta = 0.0, direct = 0.0;
  for (int t = 0; t < 10; ++t) {
    PhantomSpec s;
    s.kind = PhantomKind::ShiftedPair;
    s.dims = Dims{{32, 32}};
    s.seed = 100 + t;
    s.regions = 5;
    s.shift = {2, 1};
    s.texture = 0.1;
    const Phantom ph = make_phantom(s);
    const auto mask = interior_mask(s.dims, 4);
    auto pack = std::make_shared<const SpectralPack>(precompute(ph.image, 50.0, 128));
    double* acc[3] = {&naive, &delta, &direct};
    const AggregateBasis kinds[3] = {AggregateBasis::Naive, AggregateBasis::Delta,
                                     AggregateBasis::Direct};
    for (int v = 0; v < 3; ++v) {
      RegistrationOptions o;
      o.aggregation = AggregationOptions{3, 0.05, kinds[v]};
      const auto r = register_images(ph.image, *ph.moving, grid, o, pack);
      *acc[v] += mean_endpoint_error(r.field.vectors, *ph.true_field, mask) / 10.0;
    }
  }
  return {delta <= naive && delta <= direct + 0.25,
          "mean endpoint error naive " + fmt("%.3f", naive) + ", delta " + fmt("%.3f", delta) +
              ", direct " + fmt("%.3f", direct)};
}

Outcome registration_sanity() {
  const DisplacementGrid grid{{7, 7}, 1};
  double self_worst = 0.0;
  double shift_worst = 0.0;
  for (int t = 0; t < 3; ++t) {
    PhantomSpec s;
    s.kind = PhantomKind::ShiftedPair;
    s.dims = Dims{{32, 32}};
    s.seed = 500 + t;
    s.regions = 5;
    s.shift = {2, 1};
    s.texture = 0.1;
    const Phantom ph = make_phantom(s);
    RegistrationOptions o;
    const auto self = register_images(ph.image, ph.image, grid, o);
    self_worst = std::max(self_worst, self.field.vectors.cwiseAbs().maxCoeff());
    const auto shifted = register_images(ph.image, *ph.moving, grid, o);
    shift_worst = std::max(shift_worst, mean_endpoint_error(shifted.field.vectors, *ph.true_field,
                                                            interior_mask(s.dims, 4)));
  }
  return {self_worst <= 0.25 && shift_worst <= 0.5,
          "self max " + fmt("%.3f", self_worst) + ", shift mean error " + fmt("%.3f", shift_worst)};
}

Outcome linear_scaling() {
  const Phantom ph = blobs(128, 128, 21, 3);
  const Index n = ph.image.size();
  const double beta = 50.0;
  const Laplacian lap = laplacian(build_graph(ph.image, beta), LaplacianMode::Normalized);
  const auto seeds = sample_seeds(ph.truth, ph.labels, 5, 3);
  const LabelProblem prob = problem_for(ph.image, seeds, ph.labels, 0.0);

  // Timing depends only on the basis shape, so an orthonormal random basis
  // stands in for 800 eigenvectors.
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd v(n, 800);
  for (Index i = 0; i < v.size(); ++i) v.data()[i] = g(rng);
  v.col(0) = lap.d_sqrt;
  const Eigen::MatrixXd q =
      Eigen::HouseholderQR<Eigen::MatrixXd>(v).householderQ() * Eigen::MatrixXd::Identity(n, 800);
  const DenseBasis basis(q, Eigen::VectorXd::LinSpaced(800, 0.0, 1.0));

  std::vector<double> ms;
  for (int m = 100; m <= 800; m += 100) ms.push_back(m);
  std::vector<double> ts(ms.size(), std::numeric_limits<double>::infinity());
  for (int rep = 0; rep < 15; ++rep) {
    for (std::size_t i = 0; i < ms.size(); ++i) {
      FastSolveOptions fo;
      fo.m_use = static_cast<Index>(ms[i]);
      const auto t0 = Clock::now();
      solve_fast(basis, lap, prob, fo);
      ts[i] = std::min(ts[i], since(t0));
    }
  }
  const Eigen::Map<const Eigen::VectorXd> x(ms.data(), static_cast<Index>(ms.size()));
  const Eigen::Map<const Eigen::VectorXd> y(ts.data(), static_cast<Index>(ts.size()));
  const double xm = x.mean(), ym = y.mean();
  const double sxy = ((x.array() - xm) * (y.array() - ym)).sum();
  const double sxx = (x.array() - xm).square().sum();
  const double syy = (y.array() - ym).square().sum();
  const double r2 = sxy * sxy / (sxx * syy);

  double cg_best = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 3; ++rep) {
    const auto t0 = Clock::now();
    solve_basic(lap, prob);
    cg_best = std::min(cg_best, since(t0));
  }
  return {r2 >= 0.95 && ts.front() < cg_best,
          "R^2 " + fmt("%.4f", r2) + ", fast m=100 " + fmt("%.4f s", ts.front()) + " vs CG " +
              fmt("%.4f s", cg_best) + ", m=800 " + fmt("%.4f s", ts.back())};
}

Outcome metrics() {
  auto row = [](std::vector<std::uint16_t> v) {
    const Index n = static_cast<Index>(v.size());
    return LabelMap{Dims{{n, 1}}, std::move(v)};
  };
  const bool ok =
      dice(row({1, 1, 0}), row({1, 1, 0}), 2).per_label == std::vector<double>{1.0, 1.0} &&
      dice(row({1, 1, 1}), row({0, 0, 0}), 2).per_label[1] == 0.0 &&
      dice(row({1, 1, 0}), row({0, 1, 1}), 2).per_label[1] == 0.5 &&
      mean_overlap(row({2, 1, 0}), row({2, 1, 0}), 3) == 1.0 &&
      mean_overlap(row({1, 1, 0}), row({0, 1, 1}), 2) == 0.5 &&
      mean_overlap(row({0, 0, 0}), row({0, 0, 0}), 3) == 1.0;
  return {ok, "6 reference cases"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
      {"oracle exactness", oracle_exactness},
      {"eigensolver correctness", eigensolver},
      {"spectral truncation trend", truncation_trend},
      {"adaptive selection", adaptive_selection},
      {"f/g monotonicity", fg_monotonicity},
      {"rayleigh refresh", rayleigh_refresh},
      {"aggregation null test", aggregation_null},
      {"delta vs naive", delta_vs_naive},
      {"registration sanity", registration_sanity},
      {"online linear scaling", linear_scaling},
      {"metrics", metrics},
  };
  int failures = 0;
  for (const auto& [name, run] : checks) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  %-28s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                since(t0));
    std::fflush(stdout);
  }
  return failures;
}

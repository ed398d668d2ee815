#include "rwfast/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "rwfast/adaptive.hpp"
#include "rwfast/errors.hpp"
#include "rwfast/fast_rw.hpp"
#include "rwfast/metrics.hpp"
#include "rwfast/rw_solver.hpp"

namespace rwfast {

namespace {

using Clock = std::chrono::steady_clock;
using json = nlohmann::json;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw FormatError("bad number '" + s + "' in report");
  }
  return v;
}

}  // namespace

Eigen::MatrixXd gaussian_seed_priors(const Image& image,
                                     const std::vector<std::pair<Index, int>>& seeds, int labels) {
  std::vector<double> sum(labels, 0.0), sq(labels, 0.0), count(labels, 0.0);
  for (const auto& [x, l] : seeds) {
    if (l < 0 || l >= labels) throw InvalidParam("seed label out of range");
    const double v = image.at(x);
    sum[l] += v;
    sq[l] += v * v;
    count[l] += 1.0;
  }
  std::vector<double> mean(labels, 0.5), var(labels, 1.0);
  for (int k = 0; k < labels; ++k) {
    if (count[k] == 0.0) continue;
    mean[k] = sum[k] / count[k];
    var[k] = std::max(sq[k] / count[k] - mean[k] * mean[k], 1e-4);
  }
  const Index n = image.size();
  Eigen::MatrixXd p(n, labels);
  for (Index x = 0; x < n; ++x) {
    // Log-densities shifted by their maximum before exponentiating.
    Eigen::VectorXd logp(labels);
    for (int k = 0; k < labels; ++k) {
      const double d = image.at(x) - mean[k];
      logp[k] = -0.5 * d * d / var[k] - 0.5 * std::log(2.0 * std::numbers::pi * var[k]);
    }
    const Eigen::VectorXd e = (logp.array() - logp.maxCoeff()).exp();
    p.row(x) = e.transpose() / e.sum();
  }
  return p;
}

BenchConfig BenchConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("bench config: ") + e.what());
  }
  BenchConfig c;
  try {
    if (j.contains("phantom")) {
      const json& p = j["phantom"];
      c.phantom.kind = parse_phantom_kind(p.value("kind", std::string("blobs2d")));
      if (p.contains("dims")) c.phantom.dims.extents = p["dims"].get<std::vector<Index>>();
      c.phantom.regions = p.value("regions", c.phantom.regions);
      c.phantom.noise_sigma = p.value("noise", c.phantom.noise_sigma);
      c.phantom.texture = p.value("texture", c.phantom.texture);
    }
    c.repetitions = j.value("repetitions", c.repetitions);
    c.master_seed = j.value("master_seed", c.master_seed);
    if (j.contains("methods")) c.methods = j["methods"].get<std::vector<std::string>>();
    if (j.contains("m_values")) c.m_values = j["m_values"].get<std::vector<int>>();
    if (j.contains("betas")) c.betas = j["betas"].get<std::vector<double>>();
    c.gamma = j.value("gamma", c.gamma);
    c.seeds_per_region = j.value("seeds_per_region", c.seeds_per_region);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.pack_m = j.value("pack_m", c.pack_m);
    c.cg_tol = j.value("cg_tol", c.cg_tol);
    c.record_timings = j.value("record_timings", c.record_timings);
  } catch (const json::exception& e) {
    throw InvalidParam(std::string("bench config: ") + e.what());
  }
  for (const auto& m : c.methods) {
    if (m != "basic" && m != "fast" && m != "adaptive") {
      throw InvalidParam("unknown bench method '" + m + "'");
    }
  }
  if (c.repetitions < 1) throw InvalidParam("repetitions must be >= 1");
  if (c.m_values.empty()) throw InvalidParam("m_values must not be empty");
  return c;
}

BenchConfig BenchConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open bench config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

BenchReport run_benchmark(const BenchConfig& config) {
  BenchReport report;
  const bool wants_pack =
      std::find_if(config.methods.begin(), config.methods.end(),
                   [](const std::string& m) { return m != "basic"; }) != config.methods.end();
  const int pack_m =
      config.pack_m > 0 ? config.pack_m : *std::max_element(config.m_values.begin(), config.m_values.end());
  auto timed = [&](double s) { return config.record_timings ? s : 0.0; };

  for (int run = 0; run < config.repetitions; ++run) {
    PhantomSpec spec = config.phantom;
    spec.seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(2 * run));
    const Phantom ph = make_phantom(spec);
    const int k = ph.labels;
    const Index n = ph.image.size();
    const auto seed_list = sample_seeds(ph.truth, k, config.seeds_per_region,
                                        derive_seed(config.master_seed, 2 * run + 1));
    LabelProblem problem;
    problem.labels = k;
    problem.seeds = SeedPartition(n, seed_list);
    problem.gamma = config.gamma;
    if (config.gamma > 0.0) problem.priors = gaussian_seed_priors(ph.image, seed_list, k);

    for (double beta : config.betas) {
      const Laplacian lap = laplacian(build_graph(ph.image, beta), LaplacianMode::Normalized);
      CgOptions cg;
      cg.tol = config.cg_tol;
      auto t = Clock::now();
      const ProbabilityField basic = solve_basic(lap, problem, cg);
      const double basic_seconds = seconds_since(t);
      auto record = [&](const std::string& method, int m_use, double pre, double online,
                        const ProbabilityField& u) {
        BenchRecord r;
        r.run = run;
        r.method = method;
        r.beta = beta;
        r.gamma = config.gamma;
        r.m_use = m_use;
        r.clusters = n;
        r.precompute_seconds = timed(pre);
        r.online_seconds = timed(online);
        r.dsc = dice(hard_labels(u), ph.truth, k).mean;
        r.gap = (u.values - basic.values).norm();
        report.records.push_back(std::move(r));
      };
      if (std::find(config.methods.begin(), config.methods.end(), "basic") != config.methods.end()) {
        record("basic", 0, 0.0, basic_seconds, basic);
      }
      if (!wants_pack) continue;

      t = Clock::now();
      const SpectralPack pack = precompute(ph.image, beta, std::min<Index>(pack_m, n));
      const double pre_seconds = seconds_since(t);
      const PackBasis basis(pack);
      for (const auto& method : config.methods) {
        if (method == "fast") {
          for (int m : config.m_values) {
            FastSolveOptions fo;
            fo.m_use = std::min(m, pack.size());
            t = Clock::now();
            const ProbabilityField u = solve_fast(basis, lap, problem, fo);
            record("fast", fo.m_use, pre_seconds, seconds_since(t), u);
          }
        } else if (method == "adaptive") {
          AdaptivePolicy policy;
          policy.epsilon = config.epsilon;
          t = Clock::now();
          const MSelection sel = select_m(basis, lap, problem, policy);
          FastSolveOptions fo;
          fo.m_use = sel.m_use;
          const ProbabilityField u = solve_fast(basis, lap, problem, fo);
          record("adaptive", sel.m_use, pre_seconds, seconds_since(t), u);
        }
      }
    }
  }
  return report;
}

std::string to_csv(const BenchReport& report) {
  std::string out = std::string(kBenchCsvHeader) + "\n";
  for (const auto& r : report.records) {
    out += std::to_string(r.run) + "," + r.method + "," + format_double(r.beta) + "," +
           format_double(r.gamma) + "," + std::to_string(r.m_use) + "," +
           std::to_string(r.clusters) + "," + format_double(r.precompute_seconds) + "," +
           format_double(r.online_seconds) + "," + format_double(r.dsc) + "," +
           format_double(r.gap) + "\n";
  }
  return out;
}

BenchReport parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kBenchCsvHeader) throw FormatError("bad report header");
  BenchReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw FormatError("report row needs 10 fields: " + line);
    BenchRecord r;
    r.run = static_cast<int>(parse_double(f[0]));
    r.method = f[1];
    r.beta = parse_double(f[2]);
    r.gamma = parse_double(f[3]);
    r.m_use = static_cast<int>(parse_double(f[4]));
    r.clusters = static_cast<Index>(parse_double(f[5]));
    r.precompute_seconds = parse_double(f[6]);
    r.online_seconds = parse_double(f[7]);
    r.dsc = parse_double(f[8]);
    r.gap = parse_double(f[9]);
    report.records.push_back(std::move(r));
  }
  return report;
}

void save_report(const BenchReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write report " + path.string());
  out << to_csv(report);
}

BenchReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open report " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

}  // namespace rwfast

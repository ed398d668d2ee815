#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rwfast/image.hpp"
#include "rwfast/phantom.hpp"

namespace rwfast {

/// Per-label Gaussian fitted to the seed intensities; rows normalized.
Eigen::MatrixXd gaussian_seed_priors(const Image& image,
                                     const std::vector<std::pair<Index, int>>& seeds, int labels);

struct BenchConfig {
  PhantomSpec phantom;
  int repetitions = 1;
  std::uint64_t master_seed = 1;
  std::vector<std::string> methods{"basic", "fast", "adaptive"};
  std::vector<int> m_values{32, 64, 128};
  std::vector<double> betas{50.0};
  double gamma = 0.0;
  int seeds_per_region = 10;
  double epsilon = 0.1;
  int pack_m = 0;  // 0 = largest of m_values
  double cg_tol = 1e-8;
  bool record_timings = true;

  static BenchConfig from_json_text(const std::string& text);
  static BenchConfig load(const std::filesystem::path& path);
};

struct BenchRecord {
  int run = 0;
  std::string method;
  double beta = 0.0;
  double gamma = 0.0;
  int m_use = 0;
  Index clusters = 0;
  double precompute_seconds = 0.0;
  double online_seconds = 0.0;
  double dsc = 0.0;
  double gap = 0.0;  // Frobenius distance to the basic solve

  bool operator==(const BenchRecord&) const = default;
};

struct BenchReport {
  std::vector<BenchRecord> records;
};

/// Runs every (repetition, beta, method, m) cell sequentially. Seed sets are
/// shared by all methods of a repetition.
BenchReport run_benchmark(const BenchConfig& config);

inline constexpr const char* kBenchCsvHeader =
    "run,method,beta,gamma,m_use,clusters,precompute_seconds,online_seconds,dsc,gap";

std::string to_csv(const BenchReport& report);
BenchReport parse_csv(const std::string& text);
void save_report(const BenchReport& report, const std::filesystem::path& path);
BenchReport load_report(const std::filesystem::path& path);

}  // namespace rwfast

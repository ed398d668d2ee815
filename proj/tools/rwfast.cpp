// rwfast: precompute spectral packs, segment, register, benchmark, serve.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rwfast/adaptive.hpp"
#include "rwfast/bench.hpp"
#include "rwfast/errors.hpp"
#include "rwfast/fast_rw.hpp"
#include "rwfast/refresh.hpp"
#include "rwfast/registration.hpp"
#include "rwfast/service.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace rwfast;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kNumeric = 3 };

std::string beta_tag(double beta) {
  std::ostringstream s;
  s << beta;
  return s.str();
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::pair<Index, int>> read_seeds(const fs::path& path) {
  const json j = read_json(path);
  const json& list = j.is_object() ? j.at("seeds") : j;
  std::vector<std::pair<Index, int>> seeds;
  try {
    for (const auto& s : list) {
      if (s.is_array()) {
        seeds.emplace_back(s.at(0).get<Index>(), s.at(1).get<int>());
      } else {
        seeds.emplace_back(s.at("index").get<Index>(), s.at("label").get<int>());
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return seeds;
}

std::vector<int> parse_grid(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      out.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw InvalidParam("bad grid '" + text + "', expected e.g. 7x7");
    }
  }
  return out;
}

struct PrecomputeArgs {
  std::string image;
  std::vector<double> betas;
  int m = 160;
  double eig_tol = 1e-6;
  std::string out_dir = ".";
  std::string prefix;
};

int run_precompute(const PrecomputeArgs& a) {
  const Image image = load_image(a.image);
  const std::string stem = a.prefix.empty() ? fs::path(a.image).stem().string() : a.prefix;
  fs::create_directories(a.out_dir);
  PrecomputeOptions opts;
  opts.eig.tol = a.eig_tol;
  for (double beta : a.betas) {
    const SpectralPack pack = precompute(image, beta, a.m, opts);
    const fs::path out = fs::path(a.out_dir) / (stem + "_b" + beta_tag(beta) + ".rwpk");
    save_pack(pack, out);
    std::cout << out.string() << "  m=" << pack.size();
    if (pack.size() < a.m) std::cout << " (requested " << a.m << ", eigensolver stopped early)";
    std::cout << "\n";
  }
  return kOk;
}

struct SegmentArgs {
  std::vector<std::string> inputs;  // image, packs..., seeds
  double gamma = 0.0;
  double beta_online = -1.0;
  bool adaptive = false;
  int m_use = 0;
  double epsilon = 0.1;
  int labels = 0;
  std::string out = "segment";
};

int run_segment(const SegmentArgs& a) {
  if (a.inputs.size() < 3) throw InvalidParam("segment needs: image pack [pack...] seeds.json");
  const Image image = load_image(a.inputs.front());
  std::vector<std::shared_ptr<const SpectralPack>> packs;
  for (std::size_t i = 1; i + 1 < a.inputs.size(); ++i) {
    packs.push_back(std::make_shared<const SpectralPack>(load_pack(a.inputs[i])));
  }
  const PackSet set(packs);
  const auto seed_list = read_seeds(a.inputs.back());
  int k = a.labels;
  if (k == 0) {
    for (const auto& s : seed_list) k = std::max(k, s.second + 1);
    k = std::max(k, 2);
  }

  LabelProblem problem;
  problem.labels = k;
  problem.gamma = a.gamma;
  problem.seeds = SeedPartition(image.size(), seed_list);
  if (a.gamma > 0.0) problem.priors = gaussian_seed_priors(image, seed_list, k);

  const double beta = a.beta_online >= 0.0 ? a.beta_online : set.packs().front()->beta;
  const std::size_t base_index = set.nearest(beta);
  const SpectralPack& base = *set.packs()[base_index];
  if (image_content_hash(image) != base.image_hash) throw ImageMismatch("pack was built from a different image");
  std::unique_ptr<ColumnBasis> basis;
  Laplacian lap;
  bool refreshed = false;
  if (base.beta == beta) {
    basis = std::make_unique<PackBasis>(base);
    lap = laplacian(build_graph(image, beta), LaplacianMode::Normalized);
  } else {
    auto r = std::make_unique<RefreshedPack>(refresh(set.packs()[base_index], image, beta));
    lap = r->laplacian();
    basis = std::move(r);
    refreshed = true;
  }

  FastSolveOptions fo;
  fo.m_use = a.m_use;
  json report;
  if (a.adaptive) {
    AdaptivePolicy policy;
    policy.epsilon = a.epsilon;
    const MSelection sel = select_m(*basis, lap, problem, policy);
    fo.m_use = sel.m_use;
    report["adaptive"] = {{"passed", sel.passed}, {"tested", sel.tested}};
  }
  FastSolveReport rep;
  ProbabilityField u = solve_fast(*basis, lap, problem, fo, &rep);
  u.dims = image.dims;
  const fs::path labels_path = a.out + "_labels.rawj";
  const fs::path prob_path = a.out + "_prob.rawj";
  save_label_map(hard_labels(u), labels_path);
  save_probability_field(u, prob_path);
  report["m_use"] = rep.m_use;
  report["labels"] = k;
  report["gamma"] = a.gamma;
  report["beta"] = beta;
  report["base_beta"] = base.beta;
  report["refreshed"] = refreshed;
  report["online_seconds"] = rep.seconds;
  report["rcond"] = rep.rcond;
  report["max_row_deviation"] = rep.pre_normalization_deviation;
  report["outputs"] = {labels_path.string(), prob_path.string()};
  write_json(a.out + "_report.json", report);
  std::cout << "m_use=" << rep.m_use << " online=" << rep.seconds << "s -> " << labels_path.string()
            << "\n";
  return kOk;
}

struct RegisterArgs {
  std::string fixed;
  std::string moving;
  std::string pack;
  std::string grid = "7x7";
  int step = 1;
  double gamma = 1.0;
  double beta = 50.0;
  int patch_radius = 2;
  double sharpness = kDefaultPriorSharpness;
  int m_use = 0;
  bool adaptive = false;
  double epsilon = 0.1;
  std::vector<double> aggregate;  // tol radius
  std::string aggregate_basis = "delta";
  std::string moving_labels;
  std::string out = "register";
};

int run_register(const RegisterArgs& a) {
  const Image fixed = load_image(a.fixed);
  const Image moving = load_image(a.moving);
  DisplacementGrid grid{parse_grid(a.grid), a.step};
  RegistrationOptions o;
  o.gamma = a.gamma;
  o.beta = a.beta;
  o.patch_radius = a.patch_radius;
  o.prior_sharpness = a.sharpness;
  o.m_use = a.m_use;
  o.adaptive = a.adaptive;
  o.policy.epsilon = a.epsilon;
  std::shared_ptr<const SpectralPack> pack;
  if (!a.pack.empty()) {
    pack = std::make_shared<const SpectralPack>(load_pack(a.pack));
    o.solver = RegistrationSolver::Fast;
  }
  if (!a.aggregate.empty()) {
    if (a.aggregate.size() != 2) throw InvalidParam("--aggregate takes: tol radius");
    AggregationOptions ao;
    ao.similarity_tol = a.aggregate[0];
    ao.max_radius = static_cast<int>(a.aggregate[1]);
    if (a.aggregate_basis == "naive") {
      ao.basis = AggregateBasis::Naive;
    } else if (a.aggregate_basis == "direct") {
      ao.basis = AggregateBasis::Direct;
    } else if (a.aggregate_basis != "delta") {
      throw InvalidParam("--aggregate-basis must be naive, delta or direct");
    }
    o.aggregation = ao;
  }
  const RegistrationResult r = register_images(fixed, moving, grid, o, pack);
  const fs::path field_path = a.out + "_field.rawj";
  save_displacement_field(r.field, field_path);
  json report{{"m_use", r.report.m_use},
              {"clusters", r.report.clusters},
              {"prior_seconds", r.report.prior_seconds},
              {"solve_seconds", r.report.solve_seconds},
              {"total_seconds", r.report.total_seconds},
              {"adaptive_passed", r.report.adaptive_passed},
              {"field", field_path.string()}};
  if (!a.moving_labels.empty()) {
    const fs::path warped = a.out + "_warped_labels.rawj";
    save_label_map(warp_labels(load_label_map(a.moving_labels), r.field), warped);
    report["warped_labels"] = warped.string();
  }
  write_json(a.out + "_report.json", report);
  std::cout << "clusters=" << r.report.clusters << " m_use=" << r.report.m_use << " -> "
            << field_path.string() << "\n";
  return kOk;
}

HttpService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

int run_serve(const std::string& host, int port) {
  SessionStore store;
  HttpService service(store);
  const int bound = service.bind(host, port);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "listening on http://" << host << ":" << bound << std::endl;
  service.serve();
  g_service = nullptr;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral random walker segmentation and registration"};
  app.require_subcommand(1);

  PrecomputeArgs pre;
  auto* c_pre = app.add_subcommand("precompute", "Eigendecompose an image graph into .rwpk packs");
  c_pre->add_option("image", pre.image, "Image (.pgm or .rawj)")->required();
  c_pre->add_option("--beta", pre.betas, "Edge weight beta; repeat for several packs")->required();
  c_pre->add_option("--m", pre.m, "Eigenpairs per pack");
  c_pre->add_option("--eig-tol", pre.eig_tol, "Eigenpair residual tolerance");
  c_pre->add_option("--out-dir", pre.out_dir, "Output directory");
  c_pre->add_option("--prefix", pre.prefix, "Output file prefix (default: image stem)");

  SegmentArgs seg;
  auto* c_seg = app.add_subcommand("segment", "Fast random walker segmentation from seeds");
  c_seg->add_option("inputs", seg.inputs, "image pack [pack...] seeds.json")->required();
  c_seg->add_option("--gamma", seg.gamma, "Prior weight (priors fitted to seed intensities)");
  c_seg->add_option("--beta-online", seg.beta_online, "Online beta; refreshes the nearest pack");
  c_seg->add_flag("--adaptive", seg.adaptive, "Choose m from the seeds");
  c_seg->add_option("--m-use", seg.m_use, "Eigenvectors to use (default: all)");
  c_seg->add_option("--epsilon", seg.epsilon, "Adaptive tolerance");
  c_seg->add_option("--labels", seg.labels, "K (default: largest seed label + 1)");
  c_seg->add_option("--out", seg.out, "Output prefix");

  RegisterArgs reg;
  auto* c_reg = app.add_subcommand("register", "Random walker registration of moving onto fixed");
  c_reg->add_option("fixed", reg.fixed)->required();
  c_reg->add_option("moving", reg.moving)->required();
  c_reg->add_option("pack", reg.pack, "Pack of the fixed image (enables the fast path)");
  c_reg->add_option("--grid", reg.grid, "Displacement grid extents, e.g. 7x7 or 7x7x3");
  c_reg->add_option("--step", reg.step, "Displacement grid step in voxels");
  c_reg->add_option("--gamma", reg.gamma);
  c_reg->add_option("--beta", reg.beta);
  c_reg->add_option("--patch-radius", reg.patch_radius);
  c_reg->add_option("--sharpness", reg.sharpness, "Prior exponent scale");
  c_reg->add_option("--m-use", reg.m_use);
  c_reg->add_flag("--adaptive", reg.adaptive);
  c_reg->add_option("--epsilon", reg.epsilon);
  c_reg->add_option("--aggregate", reg.aggregate, "Super-vertex aggregation: tol radius")->expected(2);
  c_reg->add_option("--aggregate-basis", reg.aggregate_basis, "naive | delta | direct");
  c_reg->add_option("--moving-labels", reg.moving_labels, "Label map to warp with the result");
  c_reg->add_option("--out", reg.out, "Output prefix");

  std::string suite;
  std::string report_path = "bench.csv";
  auto* c_bench = app.add_subcommand("bench", "Run a benchmark suite and write a CSV report");
  c_bench->add_option("suite", suite, "Suite config JSON")->required();
  c_bench->add_option("--out", report_path, "CSV report path");

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* c_serve = app.add_subcommand("serve", "HTTP session service");
  c_serve->add_option("--port", port);
  c_serve->add_option("--host", host);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*c_pre) return run_precompute(pre);
    if (*c_seg) return run_segment(seg);
    if (*c_reg) return run_register(reg);
    if (*c_bench) {
      const BenchReport r = run_benchmark(BenchConfig::load(suite));
      save_report(r, report_path);
      std::cout << r.records.size() << " rows -> " << report_path << "\n";
      return kOk;
    }
    if (*c_serve) return run_serve(host, port);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}

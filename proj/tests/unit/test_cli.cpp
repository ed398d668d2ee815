#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"
#include "rwfast/bench.hpp"
#include "rwfast/phantom.hpp"
#include "rwfast/registration.hpp"
#include "rwfast/spectral_pack.hpp"

#ifndef RWFAST_CLI_PATH
#define RWFAST_CLI_PATH "rwfast"
#endif

using namespace rwfast;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "rwfast_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run cli(const std::string& args) {
  const fs::path err = work_dir() / "stderr.txt";
  const std::string cmd = "cd '" + work_dir().string() + "' && '" RWFAST_CLI_PATH "' " + args +
                          " > /dev/null 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

const Phantom& phantom() {
  static const Phantom ph = [] {
    PhantomSpec s;
    s.dims = Dims{{16, 16}};
    s.regions = 2;
    s.seed = 3;
    Phantom p = make_phantom(s);
    save_pgm(p.image, work_dir() / "img.pgm");
    json seeds = json::array();
    for (const auto& [x, l] : sample_seeds(p.truth, 2, 3, 4)) seeds.push_back({{"index", x}, {"label", l}});
    std::ofstream(work_dir() / "seeds.json") << seeds.dump();
    return p;
  }();
  return ph;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(cli("").code == 1);
  CHECK(cli("frobnicate").code == 1);
  CHECK(cli("precompute").code == 1);
  CHECK(cli("--help").code == 0);
}

TEST_CASE("precompute writes one pack per beta") {
  phantom();
  const Run r = cli("precompute img.pgm --beta 25 --beta 50 --m 20");
  CHECK(r.code == 0);
  CHECK(fs::exists(work_dir() / "img_b25.rwpk"));
  CHECK(fs::exists(work_dir() / "img_b50.rwpk"));
  const SpectralPack p = load_pack(work_dir() / "img_b50.rwpk");
  CHECK(p.beta == 50.0);
  CHECK(p.size() == 20);
}

TEST_CASE("segment with adaptive m writes labels and a report") {
  phantom();
  REQUIRE(cli("precompute img.pgm --beta 50 --m 24").code == 0);
  const Run r = cli("segment img.pgm img_b50.rwpk seeds.json --gamma 0 --adaptive --out seg");
  CHECK(r.code == 0);
  CHECK(fs::exists(work_dir() / "seg_labels.json"));
  CHECK(fs::exists(work_dir() / "seg_prob.json"));
  std::ifstream in(work_dir() / "seg_report.json");
  const json report = json::parse(in);
  CHECK(report["m_use"].get<int>() >= 2);
  CHECK(report["m_use"].get<int>() <= 24);
  CHECK(report.contains("adaptive"));
  const LabelMap labels = load_label_map(work_dir() / "seg_labels.json");
  CHECK(labels.size() == 256);
}

TEST_CASE("segment refreshes for an online beta") {
  phantom();
  REQUIRE(cli("precompute img.pgm --beta 50 --m 24").code == 0);
  CHECK(cli("segment img.pgm img_b50.rwpk seeds.json --gamma 0.01 --beta-online 70 --out seg70").code == 0);
  std::ifstream in(work_dir() / "seg70_report.json");
  const json report = json::parse(in);
  CHECK(report["refreshed"] == true);
  CHECK(report["base_beta"] == 50.0);
}

TEST_CASE("missing pack exits with 2 and names the path") {
  phantom();
  const Run r = cli("segment img.pgm missing.rwpk seeds.json");
  CHECK(r.code == 2);
  CHECK(r.err.find("missing.rwpk") != std::string::npos);
}

TEST_CASE("numeric failure exits with 3") {
  phantom();
  REQUIRE(cli("precompute img.pgm --beta 50 --m 24").code == 0);
  // One seed per label cannot be represented by a single column.
  CHECK(cli("segment img.pgm img_b50.rwpk seeds.json --m-use 1").code == 3);
}

TEST_CASE("register writes a field and warped labels") {
  PhantomSpec s;
  s.kind = PhantomKind::ShiftedPair;
  s.dims = Dims{{16, 16}};
  s.shift = {1, 0};
  s.texture = 0.1;
  const Phantom ph = make_phantom(s);
  save_rawj_image(ph.image, work_dir() / "fixed.json");
  save_rawj_image(*ph.moving, work_dir() / "moving.json");
  save_label_map(*ph.moving_truth, work_dir() / "moving_labels.json");
  const Run r = cli("register fixed.json moving.json --grid 3x3 --moving-labels moving_labels.json --out reg");
  CHECK(r.code == 0);
  const auto field = load_displacement_field(work_dir() / "reg_field.json");
  CHECK(field.vectors.rows() == 256);
  CHECK(fs::exists(work_dir() / "reg_warped_labels.json"));
  CHECK(cli("register fixed.json moving.json --grid 4x3").code == 1);
}

TEST_CASE("bench writes a csv report") {
  std::ofstream(work_dir() / "suite.json")
      << R"({"phantom": {"dims": [12, 12], "regions": 2}, "methods": ["basic", "fast"],
             "m_values": [8], "seeds_per_region": 2})";
  CHECK(cli("bench suite.json --out report.csv").code == 0);
  const BenchReport r = load_report(work_dir() / "report.csv");
  CHECK(r.records.size() == 2);
  CHECK(cli("bench nope.json --out report.csv").code == 2);
}

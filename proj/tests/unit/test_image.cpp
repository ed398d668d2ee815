#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "rwfast/errors.hpp"
#include "rwfast/image.hpp"

using namespace rwfast;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  auto dir = fs::temp_directory_path() / "rwfast_test_image";
  fs::create_directories(dir);
  return dir;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_f32_rawj(const fs::path& stem, const std::string& dims_json, std::size_t count) {
  write_bytes(fs::path(stem).replace_extension(".json"),
              R"({"dims":)" + dims_json + R"(,"dtype":"f32","order":"x-fastest"})");
  std::string payload(count * 4, '\0');
  for (std::size_t i = 0; i < count; ++i) {
    const float v = static_cast<float>(i) / static_cast<float>(count);
    std::memcpy(payload.data() + 4 * i, &v, 4);
  }
  write_bytes(fs::path(stem).replace_extension(".raw"), payload);
}

}  // namespace

TEST_CASE("dims flatten with x fastest") {
  Dims d{{3, 4, 5}};
  CHECK(d.count() == 60);
  CHECK(d.stride(0) == 1);
  CHECK(d.stride(1) == 3);
  CHECK(d.stride(2) == 12);
  const std::vector<Index> c{2, 1, 3};
  CHECK(d.flat(c) == 2 + 3 * 1 + 12 * 3);
  CHECK(d.coord(d.flat(c)) == c);
  CHECK_THROWS_AS(validate_dims(Dims{{4}}), InvalidParam);
  CHECK_THROWS_AS(validate_dims(Dims{{4, 0}}), InvalidParam);
}

TEST_CASE("pgm bytes scale to unit range") {
  const auto p = scratch_dir() / "tiny.pgm";
  write_bytes(p, std::string("P5\n2 2\n255\n") + std::string("\x00\xff\xff\x00", 4));
  const Image img = load_image(p);
  CHECK(img.dims.extents == std::vector<Index>{2, 2});
  CHECK(img.intensities == std::vector<double>{0.0, 1.0, 1.0, 0.0});
}

TEST_CASE("pgm with a bad magic is rejected") {
  const auto p = scratch_dir() / "bad.pgm";
  write_bytes(p, std::string("P2\n2 2\n255\n0 1 2 3\n"));
  CHECK_THROWS_AS(load_image(p), FormatError);
}

TEST_CASE("rawj volume loads") {
  const auto stem = scratch_dir() / "vol";
  write_f32_rawj(stem, "[3,3,3]", 27);
  const Image img = load_image(fs::path(stem).replace_extension(".json"));
  CHECK(img.size() == 27);
  CHECK(img.dims.ndim() == 3);
}

TEST_CASE("rawj payload size mismatch is a format error") {
  const auto stem = scratch_dir() / "short";
  write_f32_rawj(stem, "[2,2]", 3);
  CHECK_THROWS_AS(load_image(fs::path(stem).replace_extension(".raw")), FormatError);
}

TEST_CASE("missing file is an io error") {
  CHECK_THROWS_AS(load_image(scratch_dir() / "nope.json"), IoError);
  CHECK_THROWS_AS(load_image(scratch_dir() / "nope.pgm"), IoError);
}

TEST_CASE("rawj round trip is bit identical") {
  const auto dir = scratch_dir();
  const Image img = oracle::random_image(5, 4, 3);
  save_rawj_image(img, dir / "a.json");
  const Image back = load_image(dir / "a.json");
  save_rawj_image(back, dir / "b.json");
  CHECK(file_bytes(dir / "a.raw") == file_bytes(dir / "b.raw"));
  const Image again = load_image(dir / "b.json");
  CHECK(again.intensities == back.intensities);
}

TEST_CASE("make_image rescales raw values") {
  const Image img = make_image(Dims{{2, 2}}, {10.0, 20.0, 30.0, 50.0});
  CHECK(img.intensities == std::vector<double>{0.0, 0.25, 0.5, 1.0});
  CHECK(img.raw_min == 10.0);
  CHECK(img.raw_max == 50.0);
  CHECK_THROWS_AS(make_image(Dims{{2, 2}}, {1.0, 2.0, 3.0}), DimsMismatch);
}

TEST_CASE("hard labels take the argmax with low-index ties") {
  ProbabilityField f;
  f.dims = Dims{{3, 1}};
  f.values.resize(3, 2);
  f.values << 1.0, 0.0, 0.0, 1.0, 0.4, 0.6;
  CHECK(hard_labels(f).labels == std::vector<std::uint16_t>{0, 1, 1});

  ProbabilityField g;
  g.dims = Dims{{2, 1}};
  g.values.resize(2, 2);
  g.values << 0.2, 0.8, 0.5, 0.5;
  CHECK(hard_labels(g).labels == std::vector<std::uint16_t>{1, 0});
}

TEST_CASE("hard labels ignore positive row scaling") {
  const Eigen::MatrixXd p = oracle::random_priors(40, 4, 9);
  ProbabilityField f{Dims{{8, 5}}, p};
  ProbabilityField scaled = f;
  for (Index i = 0; i < p.rows(); ++i) scaled.values.row(i) *= 0.1 + 3.0 * i;
  CHECK(hard_labels(f).labels == hard_labels(scaled).labels);
}

TEST_CASE("label maps and probability fields round trip") {
  const auto dir = scratch_dir();
  LabelMap lm{Dims{{3, 2}}, {0, 1, 2, kUnlabeled, 1, 0}};
  save_label_map(lm, dir / "labels.rawj");
  const LabelMap back = load_label_map(dir / "labels.json");
  CHECK(back.labels == lm.labels);
  CHECK(back.dims == lm.dims);

  ProbabilityField f{Dims{{3, 2}}, oracle::random_priors(6, 3, 2)};
  save_probability_field(f, dir / "prob.json");
  const ProbabilityField pb = load_probability_field(dir / "prob.json");
  CHECK(pb.labels() == 3);
  CHECK((pb.values - f.values).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("row sum deviation") {
  Eigen::MatrixXd u(2, 2);
  u << 0.5, 0.5, 0.2, 0.7;
  CHECK(row_sum_deviation(u) == doctest::Approx(0.1));
}

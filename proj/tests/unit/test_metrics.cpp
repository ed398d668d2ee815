#include "doctest.h"
#include "rwfast/errors.hpp"
#include "rwfast/metrics.hpp"

using namespace rwfast;

namespace {

LabelMap row(std::vector<std::uint16_t> v) {
  const Index n = static_cast<Index>(v.size());
  return LabelMap{Dims{{n, 1}}, std::move(v)};
}

}  // namespace

TEST_CASE("dice on hand cases") {
  const auto a = row({0, 0, 1, 1});
  CHECK(dice(a, a, 2).mean == 1.0);
  const auto d = dice(a, row({0, 1, 1, 1}), 2);
  CHECK(d.per_label[0] == doctest::Approx(2.0 / 3.0));
  CHECK(d.per_label[1] == doctest::Approx(0.8));
  CHECK(d.mean == doctest::Approx((2.0 / 3.0 + 0.8) / 2.0));
  CHECK(dice(a, row({1, 1, 0, 0}), 2).mean == 0.0);
}

TEST_CASE("a label absent from both maps scores one") {
  const auto d = dice(row({0, 1, 0}), row({0, 1, 1}), 3);
  CHECK(d.per_label[2] == 1.0);
  CHECK(d.per_label[0] == doctest::Approx(2.0 / 3.0));
  CHECK(d.per_label[1] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("dice and overlap are symmetric") {
  const auto a = row({0, 2, 1, 1, 2, 0, 1});
  const auto b = row({1, 2, 1, 0, 2, 2, 1});
  CHECK(dice(a, b, 3).per_label == dice(b, a, 3).per_label);
  CHECK(mean_overlap(a, b, 3) == mean_overlap(b, a, 3));
}

TEST_CASE("mean overlap pools foreground labels") {
  // Foreground counts: a has 3, b has 3, agreement on 2.
  CHECK(mean_overlap(row({0, 1, 1, 2}), row({1, 1, 0, 2}), 3) == doctest::Approx(4.0 / 6.0));
  CHECK(mean_overlap(row({0, 0}), row({0, 0}), 2) == 1.0);
  CHECK(mean_overlap(row({0, 1}), row({1, 0}), 2) == 0.0);
}

TEST_CASE("metrics reject mismatched maps") {
  CHECK_THROWS_AS(dice(row({0, 1}), row({0, 1, 1}), 2), DimsMismatch);
  CHECK_THROWS_AS(mean_overlap(row({0}), row({0}), 0), InvalidParam);
}

TEST_CASE("mean endpoint error") {
  Eigen::MatrixXd a(3, 2), b(3, 2);
  a << 0, 0, 3, 4, 1, 1;
  b << 0, 0, 0, 0, 1, 2;
  CHECK(mean_endpoint_error(a, b) == doctest::Approx(2.0));
  CHECK(mean_endpoint_error(a, b, {false, true, false}) == doctest::Approx(5.0));
  CHECK(mean_endpoint_error(a, b, {false, false, false}) == 0.0);
  CHECK_THROWS_AS(mean_endpoint_error(a, b, {true}), DimsMismatch);
  CHECK_THROWS_AS(mean_endpoint_error(a, Eigen::MatrixXd(3, 1)), DimsMismatch);
}

TEST_CASE("reference dice and overlap cases") {
  CHECK(dice(row({1, 1, 0}), row({1, 1, 0}), 2).per_label == std::vector<double>{1.0, 1.0});
  CHECK(dice(row({1, 1, 1}), row({0, 0, 0}), 2).per_label[1] == 0.0);
  // A = {0, 1}, B = {1, 2} for label 1.
  CHECK(dice(row({1, 1, 0}), row({0, 1, 1}), 2).per_label[1] == 0.5);
  CHECK(mean_overlap(row({2, 1, 0}), row({2, 1, 0}), 3) == 1.0);
  CHECK(mean_overlap(row({1, 1, 0}), row({0, 1, 1}), 2) == 0.5);
  CHECK(mean_overlap(row({0, 0, 0}), row({0, 0, 0}), 3) == 1.0);
}

// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "mfakf/matrix.hpp"
#include "support/oracles.hpp"

using namespace mfakf;

TEST_CASE("construction enforces shape and finiteness") {
  CHECK_THROWS_AS(Matrix(0, 3), DimensionError);
  CHECK_THROWS_AS(Matrix(2, 0), DimensionError);
  CHECK_THROWS_AS(Matrix(2, 1, {1.0, 2.0, 3.0}), DimensionError);
  CHECK_THROWS_AS(Matrix(1, 2, {1.0, std::numeric_limits<double>::infinity()}), ValueError);
  CHECK_THROWS_AS(Matrix(1, 1, {std::nan("")}), ValueError);
  Matrix m(2, 3);
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.max_abs() == 0.0);
}

TEST_CASE("column-major layout and from_rows") {
  Matrix m = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(m(0, 1) == 2);
  CHECK(m(1, 2) == 6);
  CHECK(m.data()[0] == 1);  // column 0 first
  CHECK(m.data()[1] == 4);
  CHECK_THROWS_AS(Matrix::from_rows({{1, 2}, {3}}), DimensionError);
}

TEST_CASE("identity, transpose, block helpers") {
  Matrix i3 = Matrix::identity(3);
  CHECK(i3(1, 1) == 1.0);
  CHECK(i3(0, 1) == 0.0);
  Matrix m = Matrix::from_rows({{1, 2}, {3, 4}});
  Matrix t = transpose(m);
  CHECK(t(0, 1) == 3);
  Matrix b = m.block(0, 1, 2, 1);
  CHECK(b(0, 0) == 2);
  CHECK(b(1, 0) == 4);
  Matrix big(3, 3);
  big.set_block(1, 1, m);
  CHECK(big(2, 2) == 4);
  CHECK_THROWS_AS(m.block(1, 1, 2, 2), DimensionError);
}

TEST_CASE("text format round-trips exactly") {
  Rng rng(11);
  Matrix m = test::random_matrix(rng, 5, 3, -1e3, 1e3);
  m(0, 0) = 1.0 / 3.0;
  m(4, 2) = -2.2250738585072014e-308;
  std::stringstream ss;
  format_matrix(m, ss);
  Matrix back = parse_matrix(ss);
  CHECK(bitwise_equal(m, back));
}

TEST_CASE("parser accepts scientific notation and reports errors") {
  std::stringstream ok("2 2\n1e-3 2E+4\n-3.5e0 4\n");
  Matrix m = parse_matrix(ok);
  CHECK(m(0, 0) == doctest::Approx(1e-3));
  CHECK(m(0, 1) == doctest::Approx(2e4));

  std::stringstream missing("2 2\n1 2\n3\n");
  CHECK_THROWS_AS(parse_matrix(missing), IoError);
  std::stringstream header("x");
  CHECK_THROWS_AS(parse_matrix(header), IoError);
  std::stringstream zero("0 2\n");
  CHECK_THROWS_AS(parse_matrix(zero), IoError);
}

TEST_CASE("file io") {
  CHECK_THROWS_AS(read_matrix("/nonexistent/path/m.txt"), IoError);
  Matrix m = Matrix::from_rows({{1.5, -2}, {0, 3e-9}});
  write_matrix(m, "test_matrix_tmp.txt");
  Matrix back = read_matrix("test_matrix_tmp.txt");
  CHECK(bitwise_equal(m, back));
}

TEST_CASE("bitwise_equal distinguishes payload bits") {
  Matrix a(1, 1, {0.0});
  Matrix b(1, 1, {-0.0});
  CHECK_FALSE(bitwise_equal(a, b));  // signed zero differs
  CHECK(a(0, 0) == b(0, 0));         // though numerically equal
}

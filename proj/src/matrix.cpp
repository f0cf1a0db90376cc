// SPDX-License-Identifier: Apache-2.0
#include "mfakf/matrix.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace mfakf {

namespace {

void check_positive_dims(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0)
    throw DimensionError("Matrix: dimensions must be positive, got " +
                         std::to_string(rows) + "x" + std::to_string(cols));
}

void check_finite(const std::vector<double>& data) {
  for (double v : data)
    if (!std::isfinite(v)) throw ValueError("Matrix: non-finite element on construction");
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
  check_positive_dims(rows, cols);
  data_.assign(rows * cols, 0.0);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  check_positive_dims(rows, cols);
  if (data_.size() != rows * cols)
    throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  check_finite(data_);
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t nr = rows.size();
  if (nr == 0) throw DimensionError("Matrix::from_rows: empty row list");
  std::size_t nc = rows.begin()->size();
  Matrix m(nr, nc);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != nc)
      throw DimensionError("Matrix::from_rows: ragged rows");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  check_finite(m.data_);
  return m;
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::fabs(v));
  return m;
}

Matrix Matrix::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
  if (r0 + nr > rows_ || c0 + nc > cols_)
    throw DimensionError("Matrix::block: range out of bounds");
  Matrix out(nr, nc);
  for (std::size_t j = 0; j < nc; ++j)
    for (std::size_t i = 0; i < nr; ++i) out(i, j) = (*this)(r0 + i, c0 + j);
  return out;
}

void Matrix::set_block(std::size_t r0, std::size_t c0, const Matrix& src) {
  if (r0 + src.rows() > rows_ || c0 + src.cols() > cols_)
    throw DimensionError("Matrix::set_block: range out of bounds");
  for (std::size_t j = 0; j < src.cols(); ++j)
    for (std::size_t i = 0; i < src.rows(); ++i) (*this)(r0 + i, c0 + j) = src(i, j);
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = 0; i < m.rows(); ++i) out(j, i) = m(i, j);
  return out;
}

Matrix negate(const Matrix& m) {
  Matrix out = m;
  for (double& v : out.data()) v = -v;
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!same_shape(a, b)) throw DimensionError("add: shape mismatch");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  if (!same_shape(a, b)) throw DimensionError("sub: shape mismatch");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
  return out;
}

Matrix scale(double s, const Matrix& m) {
  Matrix out = m;
  for (double& v : out.data()) v *= s;
  return out;
}

bool same_shape(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols();
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  if (!same_shape(a, b)) return false;
  return std::memcmp(a.data().data(), b.data().data(),
                     a.size() * sizeof(double)) == 0;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!same_shape(a, b)) throw DimensionError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

Matrix parse_matrix(std::istream& in) {
  std::size_t rows = 0, cols = 0;
  if (!(in >> rows >> cols)) throw IoError("matrix parse: missing 'rows cols' header");
  if (rows == 0 || cols == 0) throw IoError("matrix parse: zero dimension in header");
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      double v;
      if (!(in >> v))
        throw IoError("matrix parse: expected " + std::to_string(rows * cols) +
                      " values, ran out at row " + std::to_string(i));
      if (!std::isfinite(v)) throw IoError("matrix parse: non-finite value");
      m(i, j) = v;
    }
  return m;
}

Matrix read_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open matrix file: " + path);
  try {
    return parse_matrix(in);
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + " (" + path + ")");
  }
}

void format_matrix(const Matrix& m, std::ostream& out) {
  out << m.rows() << " " << m.cols() << "\n";
  char buf[40];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << buf << (j + 1 == m.cols() ? "" : " ");
    }
    out << "\n";
  }
}

void write_matrix(const Matrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open output file: " + path);
  format_matrix(m, out);
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace mfakf

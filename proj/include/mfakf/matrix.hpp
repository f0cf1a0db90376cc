// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <string>
#include <vector>

#include "mfakf/error.hpp"

namespace mfakf {

/// Dense column-major matrix of doubles; the single operand type used by
/// every kernel in this library. Construction rejects NaN/Inf content.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  /// Row-major initializer, for readable literals in call sites and tests.
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  /// Largest |a_ij|; 0 for an empty matrix.
  double max_abs() const;

  Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
  void set_block(std::size_t r0, std::size_t c0, const Matrix& src);

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix transpose(const Matrix& m);
Matrix negate(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(double s, const Matrix& m);

bool same_shape(const Matrix& a, const Matrix& b);
/// Exact representation equality (memcmp of the payload), used by
/// determinism tests and the symmetry invariant.
bool bitwise_equal(const Matrix& a, const Matrix& b);
double max_abs_diff(const Matrix& a, const Matrix& b);

/// Text format used repo-wide: first line "rows cols", then `rows` lines of
/// `cols` whitespace-separated values (row order). Scientific notation is
/// accepted on input; output round-trips doubles exactly.
Matrix parse_matrix(std::istream& in);
Matrix read_matrix(const std::string& path);
void format_matrix(const Matrix& m, std::ostream& out);
void write_matrix(const Matrix& m, const std::string& path);

}  // namespace mfakf

// SPDX-License-Identifier: Apache-2.0
//
// Shared lowering internals: the DAG builder, lazy operand views, and the
// routine-level emitters. Used by lower.cpp (PE workloads) and grid.cpp
// (block-task decomposition).
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfakf/cgra/dag.hpp"
#include "mfakf/error.hpp"
#include "mfakf/matrix.hpp"

namespace mfakf::cgra::detail {

class Builder {
public:
  explicit Builder(std::string tag) { dag_.tag = std::move(tag); }

  void set_group(std::int32_t g) { group_ = g; }

  std::int32_t load(double v) { return push(OpClass::Load, ArithFn::None, -1, -1, v); }
  std::int32_t mul(std::int32_t a, std::int32_t b) {
    return push(OpClass::Mul, ArithFn::Mul, a, b, val(a) * val(b));
  }
  std::int32_t div(std::int32_t a, std::int32_t b) {
    return push(OpClass::Mul, ArithFn::Div, a, b, val(a) / val(b));
  }
  std::int32_t sqrt_(std::int32_t a) {
    return push(OpClass::Mul, ArithFn::Sqrt, a, -1, std::sqrt(val(a)));
  }
  std::int32_t add(std::int32_t a, std::int32_t b) {
    return push(OpClass::Add, ArithFn::Add, a, b, val(a) + val(b));
  }
  std::int32_t sub(std::int32_t a, std::int32_t b) {
    return push(OpClass::Add, ArithFn::Sub, a, b, val(a) - val(b));
  }
  void store(std::int32_t src, std::size_t slot) {
    std::int32_t id = push(OpClass::Store, ArithFn::None, src, -1, val(src));
    dag_.nodes[id].store_slot = static_cast<std::int32_t>(slot);
  }

  double val(std::int32_t id) const { return dag_.nodes[id].value; }
  bool empty() const { return dag_.nodes.empty(); }
  InstrDag take() { return std::move(dag_); }

private:
  std::int32_t push(OpClass cls, ArithFn fn, std::int32_t a, std::int32_t b, double v) {
    Node n;
    n.cls = cls;
    n.fn = fn;
    n.in0 = a;
    n.in1 = b;
    n.value = v;
    n.group = group_;
    dag_.nodes.push_back(n);
    return static_cast<std::int32_t>(dag_.nodes.size()) - 1;
  }
  InstrDag dag_;
  std::int32_t group_ = 0;
};

/// Read-only operand with lazy loads: each element is loaded at most once
/// per routine, at its first use (block-resident operand model).
class In {
public:
  In(Builder& b, const Matrix& m) : b_(&b), m_(&m), ids_(m.size(), -1) {}
  std::int32_t at(std::size_t i, std::size_t j) {
    std::int32_t& id = ids_[j * m_->rows() + i];
    if (id < 0) id = b_->load((*m_)(i, j));
    return id;
  }
  double val(std::size_t i, std::size_t j) const { return (*m_)(i, j); }

private:
  Builder* b_;
  const Matrix* m_;
  std::vector<std::int32_t> ids_;
};

/// Mutable working matrix: lazy loads on first read, writes replace the node.
class Work {
public:
  Work(Builder& b, Matrix init) : b_(&b), vals_(std::move(init)), ids_(vals_.size(), -1) {}
  std::int32_t id(std::size_t i, std::size_t j) {
    std::int32_t& x = ids_[j * vals_.rows() + i];
    if (x < 0) x = b_->load(vals_(i, j));
    return x;
  }
  void set(std::size_t i, std::size_t j, std::int32_t id) {
    ids_[j * vals_.rows() + i] = id;
    vals_(i, j) = b_->val(id);
  }
  double val(std::size_t i, std::size_t j) const { return vals_(i, j); }
  const Matrix& values() const { return vals_; }
  std::size_t rows() const { return vals_.rows(); }
  std::size_t cols() const { return vals_.cols(); }

private:
  Builder* b_;
  Matrix vals_;
  std::vector<std::int32_t> ids_;
};

std::size_t add_output(Program& prog, std::string name, std::size_t rows, std::size_t cols);
std::size_t slot_of(const Program& prog, std::size_t out_idx, std::size_t i, std::size_t j);

/// head + sum(products) (or head - sum, or plain sum with head < 0), built
/// as pairwise partial sums feeding an accumulation chain: same operation
/// count as a plain chain, but tolerant of adder latency.
std::int32_t emit_dot(Builder& b, std::int32_t head, bool subtract,
                      const std::vector<std::int32_t>& products);
void store_region(Builder& b, Program& prog, std::size_t out_idx, Work& w,
                  std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc);

Matrix lower_gemm_into(Program& prog, const std::string& out_name, const Matrix& a,
                       const Matrix& b, const Matrix* addend, bool subtract);
void lower_qr_panel(Builder& b, Work& w, std::size_t j0, std::size_t bs,
                    std::vector<double>& tau);
void lower_apply_panel(Builder& b, Work& refl, In& tau_in, const std::vector<double>& tau,
                       Work& target, std::size_t j0, std::size_t bs, std::size_t c0,
                       std::size_t c1);
Matrix lower_eliminate_rows(Program& prog, const std::string& out_name,
                            const Matrix& r_packed, const Matrix& bprime,
                            const Matrix& neg_c, const Matrix& d, std::size_t row0,
                            std::size_t row1);

Matrix lower_trsm(Program& prog, const std::string& out_name, const Matrix& r_mat,
                  const Matrix& b_mat);

}  // namespace mfakf::cgra::detail

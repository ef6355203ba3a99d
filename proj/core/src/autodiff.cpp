#include "grkt/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "grkt/errors.hpp"

namespace grkt::ad {

const Matrix& Var::value() const { return tape_->value_of(id_); }

double Var::scalar() const {
  const auto& v = value();
  if (v.size() != 1) throw Error("scalar() on a non 1x1 variable");
  return v.data[0];
}

Var Tape::push(Matrix value, bool requires_grad, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(Matrix m) { return push(std::move(m), false, {}); }

Var Tape::scalar(double v) { return constant(Matrix(1, 1, v)); }

Var Tape::parameter(const Matrix& m) {
  Node n;
  n.borrowed = &m;
  n.requires_grad = grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::gather_rows(const Matrix& table, std::span<const std::size_t> rows, std::size_t slot) {
  Matrix out(rows.size(), table.cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= table.rows) throw Error("gather_rows: row index out of range");
    std::copy_n(table.row(rows[r]).begin(), table.cols, out.row(r).begin());
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return push(std::move(out), grad_enabled_, [idx = std::move(idx), slot](Tape& t, std::uint32_t self) {
    const auto& g = t.grad_of(self);
    auto& sparse = t.sparse_slot(slot);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      auto& dst = sparse[idx[r]];
      if (dst.empty()) dst.assign(g.cols, 0.0);
      for (std::size_t c = 0; c < g.cols; ++c) dst[c] += g(r, c);
    }
  });
}

const Matrix& Tape::value_of(std::uint32_t id) const {
  const auto& n = nodes_[id];
  return n.borrowed ? *n.borrowed : n.value;
}

Matrix& Tape::grad_slot(std::uint32_t id) {
  auto& n = nodes_[id];
  if (n.grad.size() == 0) {
    const auto& v = value_of(id);
    n.grad = Matrix(v.rows, v.cols);
  }
  return n.grad;
}

const SparseRows& Tape::sparse_grad(std::size_t slot) const {
  static const SparseRows empty;
  auto it = sparse_.find(slot);
  return it == sparse_.end() ? empty : it->second;
}

void Tape::backward(Var root, double seed) {
  if (!root.valid() || root.tape() != this || nodes_.empty())
    throw Error("backward called without a recorded forward pass");
  if (value_of(root.id()).size() != 1) throw Error("backward root must be a scalar");
  for (auto& n : nodes_) n.grad = Matrix();
  sparse_.clear();
  grad_slot(root.id()).data[0] = seed;
  for (std::uint32_t i = root.id() + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.backward && n.grad.size() != 0) n.backward(*this, i);
  }
}

void Tape::clear() {
  nodes_.clear();
  sparse_.clear();
}

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw Error("operation on an empty variable");
  return *a.tape();
}

bool any_grad(Tape& t, std::initializer_list<Var> xs) {
  for (auto x : xs)
    if (x.valid() && t.requires_grad(x.id())) return true;
  return false;
}

void check_same(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) throw Error(std::string(op) + ": shape mismatch");
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Elementwise op with derivative computed from (input, output).
template <class F, class D>
Var unary(Var a, F f, D dfdx) {
  auto& t = tape_of(a);
  const auto& av = a.value();
  Matrix out(av.rows, av.cols);
  for (std::size_t i = 0; i < av.size(); ++i) out.data[i] = f(av.data[i]);
  auto ia = a.id();
  return t.push(std::move(out), t.requires_grad(ia), [ia, dfdx](Tape& t, std::uint32_t self) {
    const auto& g = t.grad_of(self);
    const auto& x = t.value_of(ia);
    const auto& y = t.value_of(self);
    auto& ga = t.grad_slot(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * dfdx(x.data[i], y.data[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  auto& t = tape_of(a);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.cols != B.rows) throw Error("matmul: inner dimensions differ");
  Matrix C(A.rows, B.cols);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t k = 0; k < A.cols; ++k) {
      double aik = A(i, k);
      if (aik == 0.0) continue;
      const double* brow = &B.data[k * B.cols];
      double* crow = &C.data[i * C.cols];
      for (std::size_t j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
    }
  auto ia = a.id(), ib = b.id();
  return t.push(std::move(C), any_grad(t, {a, b}), [ia, ib](Tape& t, std::uint32_t self) {
    const auto& G = t.grad_of(self);
    const auto& A = t.value_of(ia);
    const auto& B = t.value_of(ib);
    if (t.requires_grad(ia)) {
      auto& GA = t.grad_slot(ia);
      for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t k = 0; k < A.cols; ++k) {
          double s = 0;
          for (std::size_t j = 0; j < B.cols; ++j) s += G(i, j) * B(k, j);
          GA(i, k) += s;
        }
    }
    if (t.requires_grad(ib)) {
      auto& GB = t.grad_slot(ib);
      for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t k = 0; k < A.cols; ++k) {
          double aik = A(i, k);
          if (aik == 0.0) continue;
          for (std::size_t j = 0; j < B.cols; ++j) GB(k, j) += aik * G(i, j);
        }
    }
  });
}

Var matmul_nt(Var a, Var b) {
  auto& t = tape_of(a);
  const auto& A = a.value();
  const auto& B = b.value();
  if (A.cols != B.cols) throw Error("matmul_nt: inner dimensions differ");
  Matrix C(A.rows, B.rows);
  for (std::size_t i = 0; i < A.rows; ++i)
    for (std::size_t j = 0; j < B.rows; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < A.cols; ++k) s += A(i, k) * B(j, k);
      C(i, j) = s;
    }
  auto ia = a.id(), ib = b.id();
  return t.push(std::move(C), any_grad(t, {a, b}), [ia, ib](Tape& t, std::uint32_t self) {
    const auto& G = t.grad_of(self);
    const auto& A = t.value_of(ia);
    const auto& B = t.value_of(ib);
    if (t.requires_grad(ia)) {
      auto& GA = t.grad_slot(ia);
      for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < B.rows; ++j) {
          double g = G(i, j);
          if (g == 0.0) continue;
          for (std::size_t k = 0; k < A.cols; ++k) GA(i, k) += g * B(j, k);
        }
    }
    if (t.requires_grad(ib)) {
      auto& GB = t.grad_slot(ib);
      for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < B.rows; ++j) {
          double g = G(i, j);
          if (g == 0.0) continue;
          for (std::size_t k = 0; k < A.cols; ++k) GB(j, k) += g * A(i, k);
        }
    }
  });
}

Var add(Var a, Var b) {
  auto& t = tape_of(a);
  check_same(a.value(), b.value(), "add");
  Matrix out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
  auto ia = a.id(), ib = b.id();
  return t.push(std::move(out), any_grad(t, {a, b}), [ia, ib](Tape& t, std::uint32_t self) {
    const auto& g = t.grad_of(self);
    for (auto id : {ia, ib}) {
      if (!t.requires_grad(id)) continue;
      auto& gx = t.grad_slot(id);
      for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i];
    }
  });
}

Var sub(Var a, Var b) {
  auto& t = tape_of(a);
  check_same(a.value(), b.value(), "sub");
  Matrix out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= bv.data[i];
  auto ia = a.id(), ib = b.id();
  return t.push(std::move(out), any_grad(t, {a, b}), [ia, ib](Tape& t, std::uint32_t self) {
    const auto& g = t.grad_of(self);
    if (t.requires_grad(ia)) {
      auto& gx = t.grad_slot(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i];
    }
    if (t.requires_grad(ib)) {
      auto& gx = t.grad_slot(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] -= g.data[i];
    }
  });
}

Var add_n(std::span<const Var> xs) {
  if (xs.empty()) throw Error("add_n: no operands");
  auto& t = tape_of(xs[0]);
  Matrix out = xs[0].value();
  bool rg = false;
  std::vector<std::uint32_t> ids;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto& v = xs[k].value();
    check_same(out, v, "add_n");
    if (k) for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += v.data[i];
    ids.push_back(xs[k].id());
    rg = rg || t.requires_grad(xs[k].id());
  }
  return t.push(std::move(out), rg, [ids = std::move(ids)](Tape& t, std::uint32_t self) {
    const auto& g = t.grad_of(self);
    for (auto id : ids) {
      if (!t.requires_grad(id)) continue;
      auto& gx = t.grad_slot(id);
      for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i];
    }
  });
}

Var hadamard(Var a, Var b) {
  auto& t = tape_of(a);
  check_same(a.value(), b.value(), "hadamard");
  Matrix out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
  auto ia = a.id(), ib = b.id();
  return t.push(std::move(out), any_grad(t, {a, b}), [ia, ib](Tape& t, std::uint32_t self) {
    const auto& g = t.grad_of(self);
    const auto& A = t.value_of(ia);
    const auto& B = t.value_of(ib);
    if (t.requires_grad(ia)) {
      auto& gx = t.grad_slot(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i] * B.data[i];
    }
    if (t.requires_grad(ib)) {
      auto& gx = t.grad_slot(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i] * A.data[i];
    }
  });
}

Var scale(Var a, double c) {
  return unary(
      a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_row(Var a, Var bias) {
  auto& t = tape_of(a);
  const auto& bv = bias.value();
  if (bv.rows != 1 || bv.cols != a.cols()) throw Error("add_row: bias must be 1 x cols");
  Matrix out = a.value();
  for (std::size_t r = 0; r < out.rows; ++r)
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) += bv.data[c];
  auto ia = a.id(), ib = bias.id();
  return t.push(std::move(out), any_grad(t, {a, bias}), [ia, ib](Tape& t, std::uint32_t self) {
    const auto& g = t.grad_of(self);
    if (t.requires_grad(ia)) {
      auto& gx = t.grad_slot(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i];
    }
    if (t.requires_grad(ib)) {
      auto& gb = t.grad_slot(ib);
      for (std::size_t r = 0; r < g.rows; ++r)
        for (std::size_t c = 0; c < g.cols; ++c) gb.data[c] += g(r, c);
    }
  });
}

Var scale_by(Var a, Var s) {
  auto& t = tape_of(a);
  double sv = s.scalar();
  Matrix out = a.value();
  for (auto& x : out.data) x *= sv;
  auto ia = a.id(), is = s.id();
  return t.push(std::move(out), any_grad(t, {a, s}), [ia, is](Tape& t, std::uint32_t self) {
    const auto& g = t.grad_of(self);
    const auto& A = t.value_of(ia);
    double sv = t.value_of(is).data[0];
    if (t.requires_grad(ia)) {
      auto& gx = t.grad_slot(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i] * sv;
    }
    if (t.requires_grad(is)) {
      double acc = 0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g.data[i] * A.data[i];
      t.grad_slot(is).data[0] += acc;
    }
  });
}

Var scale_rows(Var a, Var s) {
  auto& t = tape_of(a);
  const auto& A = a.value();
  const auto& S = s.value();
  if (S.size() != A.rows) throw Error("scale_rows: one scale per row required");
  Matrix out = A;
  for (std::size_t r = 0; r < A.rows; ++r)
    for (std::size_t c = 0; c < A.cols; ++c) out(r, c) *= S.data[r];
  auto ia = a.id(), is = s.id();
  return t.push(std::move(out), any_grad(t, {a, s}), [ia, is](Tape& t, std::uint32_t self) {
    const auto& g = t.grad_of(self);
    const auto& A = t.value_of(ia);
    const auto& S = t.value_of(is);
    if (t.requires_grad(ia)) {
      auto& gx = t.grad_slot(ia);
      for (std::size_t r = 0; r < A.rows; ++r)
        for (std::size_t c = 0; c < A.cols; ++c) gx(r, c) += g(r, c) * S.data[r];
    }
    if (t.requires_grad(is)) {
      auto& gs = t.grad_slot(is);
      for (std::size_t r = 0; r < A.rows; ++r) {
        double acc = 0;
        for (std::size_t c = 0; c < A.cols; ++c) acc += g(r, c) * A(r, c);
        gs.data[r] += acc;
      }
    }
  });
}

Var neg(Var a) {
  return unary(
      a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var a) {
  return unary(a, stable_softplus, [](double x, double) { return stable_sigmoid(x); });
}

Var softmax_columns(Var a) {
  auto& t = tape_of(a);
  const auto& A = a.value();
  Matrix Y(A.rows, A.cols);
  for (std::size_t c = 0; c < A.cols; ++c) {
    double mx = -INFINITY;
    for (std::size_t r = 0; r < A.rows; ++r) mx = std::max(mx, A(r, c));
    double z = 0;
    for (std::size_t r = 0; r < A.rows; ++r) z += (Y(r, c) = std::exp(A(r, c) - mx));
    for (std::size_t r = 0; r < A.rows; ++r) Y(r, c) /= z;
  }
  auto ia = a.id();
  return t.push(std::move(Y), t.requires_grad(ia), [ia](Tape& t, std::uint32_t self) {
    const auto& G = t.grad_of(self);
    const auto& Y = t.value_of(self);
    auto& GA = t.grad_slot(ia);
    for (std::size_t c = 0; c < Y.cols; ++c) {
      double dot = 0;
      for (std::size_t r = 0; r < Y.rows; ++r) dot += Y(r, c) * G(r, c);
      for (std::size_t r = 0; r < Y.rows; ++r) GA(r, c) += Y(r, c) * (G(r, c) - dot);
    }
  });
}

Var softmax_rows(Var a) {
  auto& t = tape_of(a);
  const auto& A = a.value();
  Matrix Y(A.rows, A.cols);
  for (std::size_t r = 0; r < A.rows; ++r) {
    double mx = -INFINITY;
    for (std::size_t c = 0; c < A.cols; ++c) mx = std::max(mx, A(r, c));
    double z = 0;
    for (std::size_t c = 0; c < A.cols; ++c) z += (Y(r, c) = std::exp(A(r, c) - mx));
    for (std::size_t c = 0; c < A.cols; ++c) Y(r, c) /= z;
  }
  auto ia = a.id();
  return t.push(std::move(Y), t.requires_grad(ia), [ia](Tape& t, std::uint32_t self) {
    const auto& G = t.grad_of(self);
    const auto& Y = t.value_of(self);
    auto& GA = t.grad_slot(ia);
    for (std::size_t r = 0; r < Y.rows; ++r) {
      double dot = 0;
      for (std::size_t c = 0; c < Y.cols; ++c) dot += Y(r, c) * G(r, c);
      for (std::size_t c = 0; c < Y.cols; ++c) GA(r, c) += Y(r, c) * (G(r, c) - dot);
    }
  });
}

Var concat_cols(std::span<const Var> xs) {
  if (xs.empty()) throw Error("concat_cols: no operands");
  auto& t = tape_of(xs[0]);
  std::size_t rows = xs[0].rows(), cols = 0;
  bool rg = false;
  std::vector<std::uint32_t> ids;
  for (auto x : xs) {
    if (x.rows() != rows) throw Error("concat_cols: row counts differ");
    cols += x.cols();
    ids.push_back(x.id());
    rg = rg || t.requires_grad(x.id());
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (auto x : xs) {
    const auto& v = x.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.row(r).begin(), v.cols, out.row(r).begin() + static_cast<std::ptrdiff_t>(off));
    off += v.cols;
  }
  return t.push(std::move(out), rg, [ids = std::move(ids)](Tape& t, std::uint32_t self) {
    const auto& g = t.grad_of(self);
    std::size_t off = 0;
    for (auto id : ids) {
      const auto cols = t.value_of(id).cols;
      if (t.requires_grad(id)) {
        auto& gx = t.grad_slot(id);
        for (std::size_t r = 0; r < g.rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) gx(r, c) += g(r, off + c);
      }
      off += cols;
    }
  });
}

Var select_rows(Var a, std::span<const std::size_t> rows) {
  auto& t = tape_of(a);
  const auto& A = a.value();
  Matrix out(rows.size(), A.cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= A.rows) throw Error("select_rows: index out of range");
    std::copy_n(A.row(rows[r]).begin(), A.cols, out.row(r).begin());
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  auto ia = a.id();
  return t.push(std::move(out), t.requires_grad(ia), [ia, idx = std::move(idx)](Tape& t, std::uint32_t self) {
    const auto& g = t.grad_of(self);
    auto& ga = t.grad_slot(ia);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < g.cols; ++c) ga(idx[r], c) += g(r, c);
  });
}

Var mean_rows(Var a) {
  auto& t = tape_of(a);
  const auto& A = a.value();
  if (A.rows == 0) throw Error("mean_rows: empty input");
  Matrix out(1, A.cols);
  for (std::size_t r = 0; r < A.rows; ++r)
    for (std::size_t c = 0; c < A.cols; ++c) out.data[c] += A(r, c);
  const double inv = 1.0 / static_cast<double>(A.rows);
  if (A.rows > 1)
    for (auto& x : out.data) x *= inv;
  auto ia = a.id();
  return t.push(std::move(out), t.requires_grad(ia), [ia, inv](Tape& t, std::uint32_t self) {
    const auto& g = t.grad_of(self);
    auto& ga = t.grad_slot(ia);
    for (std::size_t r = 0; r < ga.rows; ++r)
      for (std::size_t c = 0; c < ga.cols; ++c) ga(r, c) += g.data[c] * inv;
  });
}

Var scatter_rows(Var a, std::span<const std::size_t> rows, std::size_t total_rows) {
  auto& t = tape_of(a);
  const auto& A = a.value();
  if (A.rows != rows.size()) throw Error("scatter_rows: row count mismatch");
  Matrix out(total_rows, A.cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= total_rows) throw Error("scatter_rows: index out of range");
    for (std::size_t c = 0; c < A.cols; ++c) out(rows[r], c) += A(r, c);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  auto ia = a.id();
  return t.push(std::move(out), t.requires_grad(ia), [ia, idx = std::move(idx)](Tape& t, std::uint32_t self) {
    const auto& g = t.grad_of(self);
    auto& ga = t.grad_slot(ia);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < ga.cols; ++c) ga(r, c) += g(idx[r], c);
  });
}

Var column(Var a, std::size_t c) {
  auto& t = tape_of(a);
  const auto& A = a.value();
  if (c >= A.cols) throw Error("column: index out of range");
  Matrix out(A.rows, 1);
  for (std::size_t r = 0; r < A.rows; ++r) out.data[r] = A(r, c);
  auto ia = a.id();
  return t.push(std::move(out), t.requires_grad(ia), [ia, c](Tape& t, std::uint32_t self) {
    const auto& g = t.grad_of(self);
    auto& ga = t.grad_slot(ia);
    for (std::size_t r = 0; r < g.rows; ++r) ga(r, c) += g.data[r];
  });
}

Var element(Var a, std::size_t r, std::size_t c) {
  auto& t = tape_of(a);
  Matrix out(1, 1, a.value()(r, c));
  auto ia = a.id();
  return t.push(std::move(out), t.requires_grad(ia), [ia, r, c](Tape& t, std::uint32_t self) {
    t.grad_slot(ia)(r, c) += t.grad_of(self).data[0];
  });
}

Var bce(Var p, double label, double eps) {
  auto& t = tape_of(p);
  double pv = p.scalar();
  double pc = std::clamp(pv, eps, 1.0 - eps);
  double loss = -(label * std::log(pc) + (1.0 - label) * std::log(1.0 - pc));
  auto ip = p.id();
  bool inside = pv > eps && pv < 1.0 - eps;
  return t.push(Matrix(1, 1, loss), t.requires_grad(ip), [ip, label, inside](Tape& t, std::uint32_t self) {
    if (!inside) return;
    double p = t.value_of(ip).data[0];
    t.grad_slot(ip).data[0] += t.grad_of(self).data[0] * (-label / p + (1.0 - label) / (1.0 - p));
  });
}

Var edge_bilinear_sigmoid(Var k, Var w, const Adjacency& adj) {
  auto& t = tape_of(k);
  const auto& K = k.value();
  const auto& W = w.value();
  if (W.rows != K.cols || W.cols != K.cols) throw Error("edge_bilinear_sigmoid: W must be d x d");
  if (adj.num_nodes() > K.rows) throw Error("edge_bilinear_sigmoid: too few embedding rows");
  const std::size_t d = K.cols;
  Matrix out(adj.num_edges(), 1);
  std::vector<double> kw(d);
  for (std::size_t i = 0; i < adj.num_nodes(); ++i) {
    if (adj.offsets[i] == adj.offsets[i + 1]) continue;
    std::fill(kw.begin(), kw.end(), 0.0);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) kw[b] += K(i, a) * W(a, b);
    for (auto e = adj.offsets[i]; e < adj.offsets[i + 1]; ++e) {
      auto j = adj.neighbors[e];
      double u = 0;
      for (std::size_t b = 0; b < d; ++b) u += kw[b] * K(j, b);
      out.data[e] = stable_sigmoid(u);
    }
  }
  auto ik = k.id(), iw = w.id();
  const Adjacency* ap = &adj;
  return t.push(std::move(out), any_grad(t, {k, w}), [ik, iw, ap](Tape& t, std::uint32_t self) {
    const auto& G = t.grad_of(self);
    const auto& Y = t.value_of(self);
    const auto& K = t.value_of(ik);
    const auto& W = t.value_of(iw);
    const std::size_t d = K.cols;
    Matrix* GK = t.requires_grad(ik) ? &t.grad_slot(ik) : nullptr;
    Matrix* GW = t.requires_grad(iw) ? &t.grad_slot(iw) : nullptr;
    std::vector<double> kw(d), kwt(d);
    for (std::size_t i = 0; i < ap->num_nodes(); ++i) {
      if (ap->offsets[i] == ap->offsets[i + 1]) continue;
      std::fill(kw.begin(), kw.end(), 0.0);
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) kw[b] += K(i, a) * W(a, b);
      for (auto e = ap->offsets[i]; e < ap->offsets[i + 1]; ++e) {
        auto j = ap->neighbors[e];
        double du = G.data[e] * Y.data[e] * (1.0 - Y.data[e]);
        if (du == 0.0) continue;
        if (GK) {
          // d/dk_i = W k_j^T, d/dk_j = k_i W
          for (std::size_t a = 0; a < d; ++a) {
            double s = 0;
            for (std::size_t b = 0; b < d; ++b) s += W(a, b) * K(j, b);
            (*GK)(i, a) += du * s;
          }
          for (std::size_t b = 0; b < d; ++b) (*GK)(j, b) += du * kw[b];
        }
        if (GW)
          for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b) (*GW)(a, b) += du * K(i, a) * K(j, b);
      }
    }
  });
}

Var graph_aggregate(Var x, const Adjacency& adj, Var edge_weights, Var node_scale) {
  auto& t = tape_of(x);
  const auto& X = x.value();
  const auto& Wt = edge_weights.value();
  const std::size_t n = adj.num_nodes();
  if (X.rows != n) throw Error("graph_aggregate: feature rows must equal node count");
  if (Wt.size() != adj.num_edges()) throw Error("graph_aggregate: one weight per edge required");
  const bool scaled = node_scale.valid();
  if (scaled && node_scale.value().size() != n) throw Error("graph_aggregate: one scale per node required");
  const std::vector<double>* S = scaled ? &node_scale.value().data : nullptr;

  Matrix out(n, X.cols);
  for (std::size_t i = 0; i < n; ++i) {
    auto lo = adj.offsets[i], hi = adj.offsets[i + 1];
    if (lo == hi) continue;
    const double inv = 1.0 / static_cast<double>(hi - lo);
    auto orow = out.row(i);
    for (auto e = lo; e < hi; ++e) {
      auto j = adj.neighbors[e];
      double coef = Wt.data[e] * (S ? (*S)[j] : 1.0) * inv;
      auto xrow = X.row(j);
      for (std::size_t c = 0; c < X.cols; ++c) orow[c] += coef * xrow[c];
    }
  }
  auto ix = x.id(), iw = edge_weights.id();
  auto is = scaled ? node_scale.id() : 0u;
  bool rg = any_grad(t, {x, edge_weights}) || (scaled && t.requires_grad(is));
  const Adjacency* ap = &adj;
  return t.push(std::move(out), rg, [ix, iw, is, scaled, ap](Tape& t, std::uint32_t self) {
    const auto& G = t.grad_of(self);
    const auto& X = t.value_of(ix);
    const auto& Wt = t.value_of(iw);
    const std::vector<double>* S = scaled ? &t.value_of(is).data : nullptr;
    Matrix* GX = t.requires_grad(ix) ? &t.grad_slot(ix) : nullptr;
    Matrix* GW = t.requires_grad(iw) ? &t.grad_slot(iw) : nullptr;
    Matrix* GS = scaled && t.requires_grad(is) ? &t.grad_slot(is) : nullptr;
    for (std::size_t i = 0; i < ap->num_nodes(); ++i) {
      auto lo = ap->offsets[i], hi = ap->offsets[i + 1];
      if (lo == hi) continue;
      const double inv = 1.0 / static_cast<double>(hi - lo);
      auto grow = G.row(i);
      for (auto e = lo; e < hi; ++e) {
        auto j = ap->neighbors[e];
        double s = S ? (*S)[j] : 1.0;
        auto xrow = X.row(j);
        if (GW || GS) {
          double dot = 0;
          for (std::size_t c = 0; c < X.cols; ++c) dot += xrow[c] * grow[c];
          if (GW) GW->data[e] += s * inv * dot;
          if (GS) GS->data[j] += Wt.data[e] * inv * dot;
        }
        if (GX) {
          double coef = Wt.data[e] * s * inv;
          auto gx = GX->row(j);
          for (std::size_t c = 0; c < X.cols; ++c) gx[c] += coef * grow[c];
        }
      }
    }
  });
}

Var learn_forget_update(Var h, Var progress, Var h0, Var learn_rate, Var forget_rate,
                        std::span<const double> steps, std::span<const char> learned) {
  auto& t = tape_of(h);
  const auto& H = h.value();
  const auto& P = progress.value();
  const auto& H0 = h0.value();
  const auto& GL = learn_rate.value();
  const auto& GF = forget_rate.value();
  for (const Matrix* m : {&P, &H0, &GL, &GF}) check_same(H, *m, "learn_forget_update");
  if (steps.size() != H.rows || learned.size() != H.rows) throw Error("learn_forget_update: per-row inputs mismatch");

  Matrix out(H.rows, H.cols);
  for (std::size_t r = 0; r < H.rows; ++r) {
    const double s = steps[r];
    for (std::size_t c = 0; c < H.cols; ++c) {
      const double h_rc = H(r, c);
      if (learned[r]) {
        double f = 1.0 - std::exp(-std::clamp(s * GL(r, c), 0.0, kMaxExponent));
        out(r, c) = h_rc + P(r, c) * f;
      } else {
        double f = 1.0 - std::exp(-std::clamp(s * GF(r, c), 0.0, kMaxExponent));
        out(r, c) = h_rc - (h_rc - H0(r, c)) * f;
      }
    }
  }
  std::vector<double> s_copy(steps.begin(), steps.end());
  std::vector<char> l_copy(learned.begin(), learned.end());
  auto ih = h.id(), ip = progress.id(), i0 = h0.id(), il = learn_rate.id(), iff = forget_rate.id();
  bool rg = any_grad(t, {h, progress, h0, learn_rate, forget_rate});
  return t.push(std::move(out), rg,
                [ih, ip, i0, il, iff, s_copy = std::move(s_copy), l_copy = std::move(l_copy)](Tape& t,
                                                                                            std::uint32_t self) {
                  const auto& G = t.grad_of(self);
                  const auto& H = t.value_of(ih);
                  const auto& P = t.value_of(ip);
                  const auto& H0 = t.value_of(i0);
                  const auto& GL = t.value_of(il);
                  const auto& GF = t.value_of(iff);
                  auto slot = [&t](std::uint32_t id) { return t.requires_grad(id) ? &t.grad_slot(id) : nullptr; };
                  Matrix* dH = slot(ih);
                  Matrix* dP = slot(ip);
                  Matrix* d0 = slot(i0);
                  Matrix* dL = slot(il);
                  Matrix* dF = slot(iff);
                  for (std::size_t r = 0; r < H.rows; ++r) {
                    const double s = s_copy[r];
                    for (std::size_t c = 0; c < H.cols; ++c) {
                      const double g = G(r, c);
                      if (g == 0.0) continue;
                      if (l_copy[r]) {
                        double z = s * GL(r, c);
                        double e = std::exp(-std::clamp(z, 0.0, kMaxExponent));
                        if (dH) (*dH)(r, c) += g;
                        if (dP) (*dP)(r, c) += g * (1.0 - e);
                        if (dL && z < kMaxExponent) (*dL)(r, c) += g * P(r, c) * s * e;
                      } else {
                        double z = s * GF(r, c);
                        double e = std::exp(-std::clamp(z, 0.0, kMaxExponent));
                        double f = 1.0 - e;
                        if (dH) (*dH)(r, c) += g * (1.0 - f);
                        if (d0) (*d0)(r, c) += g * f;
                        if (dF && z < kMaxExponent) (*dF)(r, c) -= g * (H(r, c) - H0(r, c)) * s * e;
                      }
                    }
                  }
                });
}

}  // namespace grkt::ad

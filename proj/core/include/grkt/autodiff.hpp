#pragma once

// Minimal reverse-mode differentiation over dense matrices. The op set is the
// one the GRKT recurrence needs; it is not a general tensor library.

#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "grkt/matrix.hpp"

namespace grkt::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  double scalar() const;
  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::uint32_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* t, std::uint32_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Compressed neighbor lists: neighbors of node i are
/// `neighbors[offsets[i] .. offsets[i+1])`. Edge e is the e-th entry.
struct Adjacency {
  std::vector<std::uint32_t> offsets;
  std::vector<std::uint32_t> neighbors;

  std::size_t num_nodes() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  std::size_t num_edges() const { return neighbors.size(); }
};

using SparseRows = std::unordered_map<std::size_t, std::vector<double>>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix m);
  Var scalar(double v);
  /// Leaf that borrows `m`; `m` must outlive the tape.
  Var parameter(const Matrix& m);
  /// Rows of a borrowed table; their gradients accumulate in `sparse_grad(slot)`.
  Var gather_rows(const Matrix& table, std::span<const std::size_t> rows, std::size_t slot);

  /// Propagates d(root)/d(node) scaled by `seed` to every node reachable from root.
  void backward(Var root, double seed = 1.0);

  /// Gradient of the last backward pass; an empty matrix means zero.
  const Matrix& grad(Var v) const { return nodes_.at(v.id()).grad; }
  const SparseRows& sparse_grad(std::size_t slot) const;

  std::size_t size() const { return nodes_.size(); }
  void clear();
  /// With gradients disabled, parameter leaves record no backward closures.
  void set_grad_enabled(bool on) { grad_enabled_ = on; }
  bool grad_enabled() const { return grad_enabled_; }

  // Op construction interface.
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;
  Var push(Matrix value, bool requires_grad, BackwardFn fn);
  const Matrix& value_of(std::uint32_t id) const;
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  /// Gradient slot of a node, allocated (zero) on first use.
  Matrix& grad_slot(std::uint32_t id);
  const Matrix& grad_of(std::uint32_t id) const { return nodes_[id].grad; }
  SparseRows& sparse_slot(std::size_t slot) { return sparse_[slot]; }

 private:
  struct Node {
    Matrix value;
    const Matrix* borrowed = nullptr;
    Matrix grad;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  std::unordered_map<std::size_t, SparseRows> sparse_;
  bool grad_enabled_ = true;
};

// Linear algebra.
Var matmul(Var a, Var b);
/// a * transpose(b)
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_n(std::span<const Var> xs);
Var hadamard(Var a, Var b);
Var scale(Var a, double c);
/// Adds a 1 x n bias row to every row of a.
Var add_row(Var a, Var bias);
/// Multiplies the whole of `a` by the 1 x 1 variable `s`.
Var scale_by(Var a, Var s);
/// Row r of `a` times s_r; `s` holds one entry per row.
Var scale_rows(Var a, Var s);

// Elementwise.
Var neg(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var softplus(Var a);

// Normalizations.
/// Softmax over the rows of each column (each column sums to one).
Var softmax_columns(Var a);
/// Softmax over the columns of each row.
Var softmax_rows(Var a);

// Structure.
Var concat_cols(std::span<const Var> xs);
Var select_rows(Var a, std::span<const std::size_t> rows);
Var mean_rows(Var a);
/// total_rows x cols matrix with a's rows placed at `rows`, zero elsewhere.
Var scatter_rows(Var a, std::span<const std::size_t> rows, std::size_t total_rows);
/// Column c as a rows x 1 variable.
Var column(Var a, std::size_t c);
/// Element (r, c) as a 1 x 1 variable.
Var element(Var a, std::size_t r, std::size_t c);

// Losses.
/// Binary cross-entropy of probability `p` (1 x 1) against label, with p
/// clamped to [eps, 1 - eps]. The clamp passes no gradient.
Var bce(Var p, double label, double eps = 1e-7);

// Graph ops.
/// Per edge e = (i -> j) of `adj`: sigmoid(k_i W k_j^T). Result is E x 1.
Var edge_bilinear_sigmoid(Var k, Var w, const Adjacency& adj);

/// out_i = (1/|N(i)|) * sum_{j in N(i)} w_e * s_j * x_j, zero for isolated nodes.
/// `edge_weights` is E x 1; `node_scale` (optional) has one entry per node.
Var graph_aggregate(Var x, const Adjacency& adj, Var edge_weights, Var node_scale = {});

/// Time-aware learning/forgetting update of a memory matrix. For each row c
/// with factor f(r) = 1 - exp(-clamp(steps_c * r, 0, 60)):
///   learned[c]:   h + progress ⊙ f(learn_rate)
///   otherwise:    h - (h - h0) ⊙ f(forget_rate)
Var learn_forget_update(Var h, Var progress, Var h0, Var learn_rate, Var forget_rate,
                        std::span<const double> steps, std::span<const char> learned);

inline constexpr double kMaxExponent = 60.0;

}  // namespace grkt::ad

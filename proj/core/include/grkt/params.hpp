#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "grkt/autodiff.hpp"
#include "grkt/matrix.hpp"

namespace grkt {

struct HyperParams {
  std::size_t embed_dim = 128;   // d_e
  std::size_t memory_dim = 16;   // d_k
  std::size_t hidden_dim = 128;  // d_h
  std::size_t layers = 2;        // L
  double learning_rate = 5e-3;
  double l2 = 1e-5;
  double eta = 0.6;
  std::uint64_t seed = 0;
  std::size_t batch_size = 32;
  std::size_t patience = 10;

  void validate() const;
  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

/// Named trainable arrays, each with a gradient slot and Adam moments of the same shape.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix first_moment;
    Matrix second_moment;
  };

  std::size_t add(std::string name, Matrix init);
  std::size_t index(std::string_view name) const;
  bool contains(std::string_view name) const { return index_.contains(std::string(name)); }

  std::size_t size() const { return entries_.size(); }
  Entry& operator[](std::size_t i) { return entries_[i]; }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  Matrix& value(std::string_view name) { return entries_[index(name)].value; }
  const Matrix& value(std::string_view name) const { return entries_[index(name)].value; }
  std::size_t num_scalars() const;

  void zero_grad();
  /// Values only; gradients and moments are not compared.
  bool same_values(const ParameterStore& other) const;

  HyperParams hyper;
  std::size_t num_questions = 0;
  std::size_t num_kcs = 0;
  std::uint64_t adam_step = 0;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Per-parameter gradients produced by one backward pass. Row-gathered
/// tables are kept sparse.
struct Gradients {
  std::vector<Matrix> dense;
  std::vector<ad::SparseRows> sparse;

  explicit Gradients(std::size_t n = 0) : dense(n), sparse(n) {}
  /// Adds into the store's gradient slots.
  void accumulate_into(ParameterStore& store) const;
};

struct AdamConfig {
  double learning_rate = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Added to the gradient as l2 * theta before the moment update.
  double l2 = 0.0;
};

/// One Adam step with bias correction over every entry of the store.
void adam_step(ParameterStore& store, const AdamConfig& cfg);

/// softmax(raw): strictly positive, sums to one.
std::vector<double> constrain_nonneg_vector(std::span<const double> raw);
/// Column-wise softmax: every column is positive and sums to one.
Matrix constrain_nonneg_matrix(const Matrix& raw);

/// Binds store entries to tape leaves (once per entry per tape) and gathers
/// their gradients after a backward pass.
class ParamBinder {
 public:
  ParamBinder(ad::Tape& tape, const ParameterStore& store);
  ad::Var operator()(std::size_t index);
  /// Selected rows of an entry; the gradient stays sparse.
  ad::Var gather(std::size_t index, std::span<const std::size_t> rows);
  Gradients collect() const;
  ad::Tape& tape() const { return *tape_; }

 private:
  ad::Tape* tape_;
  const ParameterStore* store_;
  std::vector<ad::Var> leaves_;
  std::vector<char> gathered_;
};

inline constexpr int kCheckpointFormatVersion = 1;

/// JSON checkpoint: format version, hyperparameters (with seed), counts, Adam step,
/// then every array with shape and row-major values. Doubles round-trip exactly.
void write_checkpoint(std::ostream& out, const ParameterStore& store);
void write_checkpoint(const std::filesystem::path& path, const ParameterStore& store);
ParameterStore read_checkpoint(std::istream& in);
ParameterStore read_checkpoint(const std::filesystem::path& path);

}  // namespace grkt

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace grkt {

using KcId = std::uint32_t;
using QuestionId = std::uint32_t;
using StudentId = std::uint32_t;

/// Bijection between original string identifiers and dense ids in [0, size()).
class IdMap {
 public:
  std::uint32_t intern(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  friend bool operator==(const IdMap& a, const IdMap& b) { return a.names_ == b.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct Response {
  QuestionId question = 0;
  std::vector<KcId> kcs;  // sorted, unique, non-empty
  std::uint8_t correct = 0;
  std::int64_t timestamp = 0;  // seconds

  friend bool operator==(const Response&, const Response&) = default;
};

/// One unit of training/evaluation. Entries past `valid_len` are padding and
/// must never be read by the model or the metrics.
struct ResponseSequence {
  StudentId student = 0;
  std::vector<Response> responses;
  std::size_t valid_len = 0;

  std::span<const Response> real() const { return {responses.data(), valid_len}; }

  friend bool operator==(const ResponseSequence&, const ResponseSequence&) = default;
};

struct Dataset {
  std::vector<ResponseSequence> sequences;
  std::vector<std::vector<KcId>> question_kcs;  // indexed by QuestionId
  IdMap students;
  IdMap questions;
  IdMap kcs;

  std::size_t num_students() const { return students.size(); }
  std::size_t num_questions() const { return questions.size(); }
  std::size_t num_kcs() const { return kcs.size(); }
  std::size_t num_responses() const;

  /// Padding sentinels: one past the last real id.
  QuestionId pad_question() const { return static_cast<QuestionId>(num_questions()); }
  KcId pad_kc() const { return static_cast<KcId>(num_kcs()); }

  /// A dataset restricted to the given sequences; id maps are shared unchanged.
  Dataset subset(std::span<const std::size_t> sequence_indices) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct ColumnSchema {
  std::string student = "student";
  std::string question = "question";
  std::string kcs = "kcs";
  std::string correct = "correct";
  std::string timestamp = "timestamp";
  char delimiter = ',';
  char kc_delimiter = ';';
  /// The timestamp column only orders rows (e.g. an order id); per student
  /// timestamps are replaced by 0, 1, 2, ... seconds after sorting.
  bool timestamp_is_order = false;
  /// Skip rows whose KC field is empty instead of failing.
  bool skip_rows_without_kcs = false;
};

/// Reads a response log. Each student's responses become one sequence sorted
/// by timestamp (stable on ties), with valid_len equal to its length.
Dataset ingest_csv(const std::filesystem::path& path, const ColumnSchema& schema = {});
Dataset ingest_csv(std::istream& in, const ColumnSchema& schema = {});

/// Splits every sequence into consecutive chunks of `seq_len`, drops chunks
/// with fewer than `min_len` responses and pads the survivors at the end.
Dataset preprocess(const Dataset& ds, std::size_t seq_len = 100, std::size_t min_len = 10);

struct FoldSplit {
  std::size_t fold = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

std::vector<FoldSplit> make_folds(std::size_t num_sequences, std::size_t k = 5, double val_frac = 0.1,
                                  std::uint64_t seed = 0);
inline std::vector<FoldSplit> make_folds(const Dataset& ds, std::size_t k = 5, double val_frac = 0.1,
                                         std::uint64_t seed = 0) {
  return make_folds(ds.sequences.size(), k, val_frac, seed);
}

inline constexpr int kDatasetFormatVersion = 1;

/// Versioned text export: header, id maps, question->KC map, sequence table,
/// then one row per real response. Re-reading reproduces the Dataset exactly.
void write_dataset(std::ostream& out, const Dataset& ds);
void write_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);

/// Loads either a raw CSV log (by `.csv` extension) or an exported dataset.
Dataset load_any(const std::filesystem::path& path, const ColumnSchema& schema = {});

}  // namespace grkt

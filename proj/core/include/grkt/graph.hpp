#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "grkt/data.hpp"

namespace grkt {

/// The three relation graphs. An edge c -> d in kPrerequisite means c is a
/// prerequisite of d; kSubsequent holds the reversed edges; kSimilar is symmetric.
enum class Relation : std::uint8_t { kPrerequisite = 0, kSubsequent = 1, kSimilar = 2 };
inline constexpr std::array<Relation, 3> kRelations = {Relation::kPrerequisite, Relation::kSubsequent,
                                                       Relation::kSimilar};
inline constexpr std::size_t index_of(Relation r) { return static_cast<std::size_t>(r); }
std::string_view relation_name(Relation r);

struct ScoredEdge {
  KcId src = 0;
  KcId dst = 0;
  double score = 0.0;

  friend bool operator==(const ScoredEdge&, const ScoredEdge&) = default;
};

struct GraphBuildConfig {
  double eta = 0.6;
  std::size_t min_cooccurrence = 10;

  void validate() const;
};

/// Immutable set of P/S/R graphs over KC ids [0, num_kcs).
class KcRelationGraphs {
 public:
  KcRelationGraphs() = default;
  explicit KcRelationGraphs(std::size_t num_kcs);

  /// Builds graphs from directed prerequisite edges and similarity edges
  /// (either orientation). Self-loops and duplicates are dropped; S is derived.
  static KcRelationGraphs from_edges(std::size_t num_kcs, std::vector<ScoredEdge> prerequisite,
                                     std::vector<ScoredEdge> similar);

  std::size_t num_kcs() const { return num_kcs_; }
  std::span<const KcId> neighbors(Relation r, KcId c) const { return adj_[index_of(r)].at(c); }
  /// Number of ordered pairs present in the graph.
  std::size_t num_edges(Relation r) const;
  /// num_edges / (|C| * (|C| - 1)).
  double sparsity(Relation r) const;
  bool has_edge(Relation r, KcId src, KcId dst) const;

  /// Prerequisite edges (src is prerequisite of dst) and similarity edges with src < dst.
  const std::vector<ScoredEdge>& prerequisite_edges() const { return prerequisite_; }
  const std::vector<ScoredEdge>& similar_edges() const { return similar_; }

  KcRelationGraphs without_prerequisite() const;
  KcRelationGraphs without_similarity() const;

  double eta = 0.0;
  std::size_t min_cooccurrence = 0;

  friend bool operator==(const KcRelationGraphs&, const KcRelationGraphs&) = default;

 private:
  std::size_t num_kcs_ = 0;
  std::array<std::vector<std::vector<KcId>>, 3> adj_;
  std::vector<ScoredEdge> prerequisite_;
  std::vector<ScoredEdge> similar_;
};

/// Pair statistics over ordered pairs of distinct responses of the same
/// student, pooled across all of that student's sequences.
class PairStatistics {
 public:
  explicit PairStatistics(const Dataset& logs);

  std::size_t num_kcs() const { return n_; }
  /// Ordered pairs (both temporal orders) with c_t = ci, c_t' = cj.
  std::uint64_t cooccurrence(KcId ci, KcId cj) const { return total_[ci * n_ + cj]; }
  std::uint64_t concordant(KcId ci, KcId cj) const { return concordant_[ci * n_ + cj]; }
  /// Temporally ordered pairs t < t' with ci answered correctly first and cj incorrectly later.
  std::uint64_t correct_then_incorrect(KcId ci, KcId cj) const { return c10_[ci * n_ + cj]; }
  std::uint64_t incorrect_then_correct(KcId ci, KcId cj) const { return c01_[ci * n_ + cj]; }

  std::optional<double> similarity(KcId ci, KcId cj, std::size_t min_cooccurrence) const;
  std::optional<double> prerequisite(KcId ci, KcId cj, std::size_t min_cooccurrence) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint64_t> total_, concordant_, c10_, c01_;
};

/// Fraction of same-student ordered response pairs (ci, cj) with equal
/// correctness. Empty when ci == cj or the pair count is below min_cooccurrence.
std::optional<double> similarity_score(const Dataset& logs, KcId ci, KcId cj, std::size_t min_cooccurrence = 10);

/// Among temporally ordered discordant pairs (ci first, cj later), the
/// fraction with ci correct and cj incorrect.
std::optional<double> prerequisite_score(const Dataset& logs, KcId ci, KcId cj, std::size_t min_cooccurrence = 10);

KcRelationGraphs build_graphs(const Dataset& logs, const GraphBuildConfig& cfg);
KcRelationGraphs build_graphs(const PairStatistics& stats, const GraphBuildConfig& cfg);

/// Expert-labeled relations: rows `src,dst,kind,confidence` with kind one of
/// prerequisite | subsequent | similar. Duplicate rows are averaged and edges
/// with mean confidence strictly above `min_confidence` are kept. KC names are
/// resolved through `kcs`; rows naming unknown KCs are skipped.
KcRelationGraphs load_labeled_graphs(std::istream& in, const IdMap& kcs, double min_confidence = 5.0);
KcRelationGraphs load_labeled_graphs(const std::filesystem::path& path, const IdMap& kcs,
                                     double min_confidence = 5.0);

inline constexpr int kGraphFormatVersion = 1;

void write_graphs(std::ostream& out, const KcRelationGraphs& g);
void write_graphs(const std::filesystem::path& path, const KcRelationGraphs& g);
KcRelationGraphs read_graphs(std::istream& in);
KcRelationGraphs read_graphs(const std::filesystem::path& path);

}  // namespace grkt

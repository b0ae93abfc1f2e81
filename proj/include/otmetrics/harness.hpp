#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "otmetrics/embedding_io.hpp"
#include "otmetrics/error.hpp"
#include "otmetrics/idf.hpp"
#include "otmetrics/metrics.hpp"
#include "otmetrics/preprocess.hpp"
#include "otmetrics/stats.hpp"

namespace otmetrics {

// ---------------------------------------------------------------------------
// Human judgments

enum class JudgmentKind { kDirectAssessment, kRelativeRanking, kSummaryCriterion };

const char* to_string(JudgmentKind kind);
JudgmentKind parse_judgment_kind(const std::string& text);

// Columns are bound by name only. Defaults follow the documented schemas:
//   DA:      segment_id, system_id, score
//   DArr:    segment_id, better_system, worse_system
//   Summary: summary_id, system_id, criterion, score
struct JudgmentSchema {
  JudgmentKind kind = JudgmentKind::kDirectAssessment;
  std::string segment_column;
  std::string system_column = "system_id";
  std::string score_column = "score";
  std::string better_column = "better_system";
  std::string worse_column = "worse_system";
  std::string criterion_column = "criterion";
  // Summary datasets: keep only rows of this criterion (all rows if unset).
  std::optional<std::string> criterion;
  std::string lang_pair;

  static JudgmentSchema defaults(JudgmentKind kind);
};

struct ScoredJudgment {
  std::string segment_id;  // summary_id for summary datasets
  std::string system_id;
  double score = 0.0;
};

struct RankedJudgment {
  std::string segment_id;
  std::string better_system;
  std::string worse_system;
};

struct JudgmentDataset {
  JudgmentKind kind = JudgmentKind::kDirectAssessment;
  std::string lang_pair;
  std::string criterion;
  std::vector<ScoredJudgment> scored;  // DA and summary datasets
  std::vector<RankedJudgment> ranked;  // relative-ranking datasets
  std::vector<std::string> notices;

  std::size_t size() const { return kind == JudgmentKind::kRelativeRanking ? ranked.size() : scored.size(); }
};

class MissingColumn : public Error {
 public:
  explicit MissingColumn(const std::string& name)
      : Error(ErrorClass::kSchema, "MissingColumn", "judgment file has no column named '" + name + "'") {}
};

class DuplicateJudgment : public Error {
 public:
  DuplicateJudgment(const std::string& segment, const std::string& system)
      : Error(ErrorClass::kSchema, "DuplicateJudgment",
              "duplicate judgment for segment '" + segment + "', system '" + system + "'") {}
};

class NonNumericScore : public Error {
 public:
  NonNumericScore(std::size_t row, const std::string& value)
      : Error(ErrorClass::kSchema, "NonNumericScore",
              "row " + std::to_string(row) + ": score '" + value + "' is not a finite number") {}
};

// CSV or TSV (tab-delimited if the header line contains a tab) with a header row.
JudgmentDataset load_judgments(const std::filesystem::path& path, const JudgmentSchema& schema);

// Splits one delimited line; double-quoted fields may contain the delimiter.
std::vector<std::string> split_delimited(const std::string& line, char delim);

// ---------------------------------------------------------------------------
// Embeddings indexed by pair

class DuplicateSegment : public Error {
 public:
  explicit DuplicateSegment(const std::string& detail)
      : Error(ErrorClass::kSchema, "DuplicateSegment", detail) {}
};

class MissingEmbedding : public Error {
 public:
  MissingEmbedding(const std::string& segment, const std::string& system)
      : Error(ErrorClass::kSchema, "MissingEmbedding",
              "no embeddings for segment '" + segment + "'" +
                  (system.empty() ? std::string() : ", system '" + system + "'")) {}
};

using PairKey = std::pair<std::string, std::string>;  // (segment_id, system_id)

class EmbeddingCorpus {
 public:
  // Records keep their own role.
  void add(SegmentRecord segment, const EmbeddingFileHeader& header);
  // Records are used as references / hypotheses regardless of their role field;
  // a hypothesis without system_id gets `default_system`.
  void add_as_reference(SegmentRecord segment, const EmbeddingFileHeader& header);
  void add_as_hypothesis(SegmentRecord segment, const EmbeddingFileHeader& header,
                         const std::string& default_system);

  static EmbeddingCorpus from_file(const std::filesystem::path& path);

  const std::vector<SegmentRecord>& segments() const noexcept { return segments_; }
  const std::optional<EmbeddingFileHeader>& header() const noexcept { return header_; }
  // Indices into segments(), file order.
  const std::vector<std::size_t>& reference_indices() const noexcept { return ref_order_; }
  const std::vector<std::size_t>& hypothesis_indices() const noexcept { return hyp_order_; }
  const std::vector<std::size_t>& references_of(const std::string& segment_id) const;
  std::optional<std::size_t> hypothesis(const PairKey& key) const;

 private:
  void check_header(const EmbeddingFileHeader& header);

  std::optional<EmbeddingFileHeader> header_;
  std::vector<SegmentRecord> segments_;
  std::vector<std::size_t> ref_order_, hyp_order_;
  std::map<std::string, std::vector<std::size_t>> refs_;
  std::map<PairKey, std::size_t> hyps_;
};

// ---------------------------------------------------------------------------
// Scoring

struct SkipRecord {
  std::string segment_id;
  std::string system_id;
  std::string reason;
  std::string detail;
};

struct ScoreRun {
  std::vector<ScoredPair> scores;
  std::vector<SkipRecord> skips;
  std::size_t zero_vector_tokens = 0;
  bool solver_nonconvergence = false;

  std::map<std::string, std::size_t> skip_reasons() const;
};

struct ScoreRequest {
  MetricConfig metric;
  PreprocessConfig prep;
  IdfMode idf = IdfOriginal{};
  MultiRefStrategy multi_ref = MultiRefStrategy::kMean;
};

// Builds the IDF tables (reference side, hypothesis side) for a request.
std::pair<IdfTable, IdfTable> build_idf_tables(const EmbeddingCorpus& corpus,
                                               const ScoreRequest& request);

// Scores every judged pair (or every hypothesis when `judgments` is null), in
// sorted (segment, system) order. Typed metric skips become SkipRecords; a
// judged pair without embeddings throws MissingEmbedding.
ScoreRun score_dataset(const EmbeddingCorpus& corpus, const JudgmentDataset* judgments,
                       const ScoreRequest& request);

// ---------------------------------------------------------------------------
// Correlation with humans

enum class Level { kSegment, kSystem, kSummary };

const char* to_string(Level level);
Level parse_level(const std::string& text);

struct CorrelationResult {
  Level level = Level::kSegment;
  std::string primary_stat;
  double primary = 0.0;
  std::map<std::string, double> values;
  std::size_t n_items = 0;
  std::size_t n_excluded = 0;
};

// Segment: DA -> |pearson|, DArr -> WMT Kendall-like tau.
// System: per-system mean metric score vs per-system mean human score, pearson.
// Summary: pearson / spearman / kendall tau-b over summaries.
CorrelationResult correlate(const ScoreRun& run, const JudgmentDataset& judgments, Level level,
                            TieRule tie_rule = TieRule::kTiesDiscordant);

}  // namespace otmetrics

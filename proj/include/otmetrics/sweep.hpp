#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "otmetrics/harness.hpp"

namespace otmetrics {

inline constexpr const char* kToolName = "otmetrics";
inline constexpr const char* kToolVersion = "0.1.0";

struct StopwordSetting {
  std::string label;
  // Unset means no stopword removal.
  std::optional<std::string> path;
};

struct IdfSetting {
  std::string label;
  IdfMode mode;
  // Sampled corpora draw with seed grid.seed + seed_offset. Without an explicit
  // offset the offset is a hash of the label, so it never depends on position.
  std::optional<std::uint64_t> seed_offset;
};

struct SubwordSetting {
  std::string label;
  SubwordStrategy subword = SubwordStrategy::kFirstPiece;
  bool remove_punct = true;
};

struct MetricSetting {
  std::string label;
  MetricConfig config;
  // Overrides the metric family's default layer aggregation.
  std::optional<LayerAggregation> layer_agg;
};

struct SweepGrid {
  std::uint64_t seed = 0;
  std::vector<MetricSetting> metrics;
  std::vector<StopwordSetting> stopwords;
  std::vector<IdfSetting> idf;
  std::vector<SubwordSetting> subword_punct;
  // Empty: segment+system for DA, segment for DArr, summary+system for summaries.
  std::vector<Level> levels;
  MultiRefStrategy multi_ref = MultiRefStrategy::kMean;
  TieRule tie_rule = TieRule::kTiesDiscordant;
  JudgmentSchema judgments = JudgmentSchema::defaults(JudgmentKind::kDirectAssessment);
  // Directory relative paths in the grid are resolved against.
  std::filesystem::path base_dir;
};

class GridError : public Error {
 public:
  explicit GridError(const std::string& detail) : Error(ErrorClass::kSchema, "GridError", detail) {}
};

// Throws GridError on an empty list or a duplicate label.
void check_grid(const SweepGrid& grid);
SweepGrid parse_grid(const std::string& json_text, const std::filesystem::path& base_dir);
SweepGrid load_grid(const std::filesystem::path& path);
std::vector<Level> effective_levels(const SweepGrid& grid);
std::uint64_t fnv1a64(const std::string& text);
// The mode a setting resolves to under `grid_seed` (sampled seeds filled in).
IdfMode resolve_idf(const IdfSetting& setting, std::uint64_t grid_seed);

enum class Factor { kStopwords, kIdf, kSubword };
const char* to_string(Factor f);

// The configuration of one sweep cell. A cell varies one factor from the
// metric's defaults; cells that resolve to the same configuration are shared.
struct CellSpec {
  std::size_t metric = 0;
  // Index into the grid list, unset for the factor's default when the grid
  // does not list it.
  std::optional<std::size_t> stopword, idf, subword;
  std::string key;
};

struct CellPlan {
  std::vector<CellSpec> cells;
  // (metric, factor, setting index) -> index into cells.
  std::map<std::tuple<std::size_t, Factor, std::size_t>, std::size_t> lookup;
};

CellPlan plan_cells(const SweepGrid& grid);
// The setting of each factor that counts as the metric's default.
std::optional<std::size_t> default_setting(const SweepGrid& grid, std::size_t metric, Factor factor);
bool factor_applies(const SweepGrid& grid, std::size_t metric, Factor factor);

struct CellResult {
  std::optional<std::string> error;
  std::map<Level, CorrelationResult> correlations;
  std::map<Level, std::string> level_errors;
  std::size_t n_scored = 0;
  std::size_t n_skipped = 0;
  std::map<std::string, std::size_t> skip_reasons;
  bool flagged = false;  // more than 5% of pairs skipped
};

struct SettingValue {
  std::string setting;
  std::optional<double> value;
  std::string absent_reason;
};

struct GroupStat {
  Factor factor = Factor::kStopwords;
  std::string group;
  std::vector<std::string> settings;
  std::vector<double> values;
  std::optional<double> cv;
  std::optional<double> range;
  std::string absent_reason;
};

struct Comparison {
  Factor factor = Factor::kIdf;
  std::string name;   // "dis,ori", "dis,pr", "rand,dis", "rand,ori"
  std::string group;  // subword strategy for "dis,pr"
  std::optional<double> a, b, ad, rd;
  std::string absent_reason;
};

struct TestCase {
  std::size_t metric = 0;
  Level level = Level::kSegment;
  std::map<Factor, std::vector<SettingValue>> values;
  std::vector<GroupStat> groups;
  std::vector<Comparison> comparisons;
  std::map<Factor, std::string> best;
};

struct SensitivityReport {
  SweepGrid grid;
  CellPlan plan;
  std::vector<CellResult> cells;
  std::vector<TestCase> cases;
  // factor -> (setting label, wins) in grid order.
  std::map<Factor, std::vector<std::pair<std::string, std::size_t>>> tally;
  std::map<Factor, std::size_t> tally_cases;
  std::size_t skipped_pairs = 0;
  std::map<std::string, std::size_t> skip_reasons;
  std::size_t failed_cells = 0;
  std::map<std::string, std::string> inputs;

  bool all_failed() const { return !cells.empty() && failed_cells == cells.size(); }
};

double cell_value(const CellResult& cell, Level level, std::string* why);

// Runs every planned cell (on up to `threads` workers) and assembles the report.
SensitivityReport run_sweep(const SweepGrid& grid, const EmbeddingCorpus& corpus,
                            const JudgmentDataset& judgments, std::size_t threads = 1);

// Single-threaded reduction of per-cell results into the sensitivity tables.
SensitivityReport assemble_report(const SweepGrid& grid, CellPlan plan, std::vector<CellResult> cells,
                                  const std::vector<Level>& levels);

std::string report_json(const SensitivityReport& report);
std::string grid_json(const SweepGrid& grid);

// Writes report.json, correlations.csv, cv_stop.csv, cv_idf.csv, cv_sub.csv,
// rd.csv and tally.csv into `dir`.
void write_report_files(const SensitivityReport& report, const std::filesystem::path& dir);

}  // namespace otmetrics

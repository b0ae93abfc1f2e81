#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "otmetrics/error.hpp"
#include "otmetrics/idf.hpp"
#include "otmetrics/preprocess.hpp"

namespace otmetrics {

enum class BertVariant { kPrecision, kRecall, kF1 };
enum class BaryDistance { kWasserstein, kSinkhorn };

struct MoverConfig {
  int n = 1;  // 1 or 2
};

struct BertScoreConfig {
  BertVariant variant = BertVariant::kF1;
  // Weight the precision side with the hypothesis IDF table instead of uniformly.
  bool idf_on_hypothesis = false;
};

struct BaryConfig {
  BaryDistance distance = BaryDistance::kWasserstein;
  double epsilon = 0.01;
  std::size_t n_layers_used = 5;
  std::size_t max_iter = 1000;
  double tol = 1e-6;
};

struct MetricConfig {
  std::variant<MoverConfig, BertScoreConfig, BaryConfig> kind = MoverConfig{};
  IdfScope idf_scope = IdfScope::kRefAndHypSeparate;
};

// Throws InvalidConfig on a violated invariant (Mover n outside {1,2}, bad epsilon).
void check_metric_config(const MetricConfig& config);
// "Mover-1", "BERT-F1", "Bary-W", ...
std::string metric_label(const MetricConfig& config);
// Default IDF scope and preprocessing of the metric family.
IdfScope default_idf_scope(const MetricConfig& config);
PreprocessConfig default_preprocess(const MetricConfig& config);
bool uses_idf(const MetricConfig& config);

struct ScoredPair {
  std::string segment_id;
  std::string system_id;
  std::string metric_label;
  double score = 0.0;  // higher is better
  std::optional<double> raw_distance;
};

// A pair the metric cannot score (empty side, all-zero IDF mass). The harness
// turns these into skip records instead of scores.
class MetricSkip : public Error {
 public:
  MetricSkip(std::string reason, const std::string& detail)
      : Error(ErrorClass::kNumeric, reason, detail) {}
  const std::string& reason() const noexcept { return code(); }
};

class EmptySide : public MetricSkip {
 public:
  explicit EmptySide(const std::string& detail) : MetricSkip("EmptySide", detail) {}
};

class ZeroMass : public MetricSkip {
 public:
  explicit ZeroMass(const std::string& detail) : MetricSkip("ZeroMass", detail) {}
};

class EmptyScores : public Error {
 public:
  EmptyScores() : Error(ErrorClass::kSchema, "EmptyScores", "no scores to aggregate") {}
};

// Word mover similarity over sliding n-grams. An n-gram's embedding is the
// IDF-weighted sum of its members and its mass the sum of member weights.
// raw_distance = exact EMD with Euclidean cost, score = 1 / (1 + raw_distance).
ScoredPair mover_score(std::span<const ProcessedToken> ref, std::span<const ProcessedToken> hyp,
                       const IdfTable& idf_ref, const IdfTable& idf_hyp, int n);

struct BertScoreResult {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Tokens whose vector was zero; their cosine similarity counts as 0.
  std::size_t zero_vector_tokens = 0;
};

double cosine_similarity(std::span<const double> x, std::span<const double> y, bool* zero = nullptr);

// Greedy cosine alignment. Recall weights reference tokens by idf_ref; precision
// weights hypothesis tokens uniformly unless idf_hyp is given.
BertScoreResult bert_score(std::span<const ProcessedToken> ref, std::span<const ProcessedToken> hyp,
                           const IdfTable& idf_ref, const IdfTable* idf_hyp = nullptr);

ScoredPair to_scored_pair(const BertScoreResult& r, BertVariant variant);

struct BaryScoreResult {
  ScoredPair pair;
  double wasserstein = 0.0;
  double sinkhorn = 0.0;
  bool barycenters_converged = true;
  bool sinkhorn_converged = true;
};

// Per side: each of the last n_layers_used layers gives a uniform cloud of token
// vectors; the side distribution is their barycenter over the union support.
// Both the Wasserstein and the Sinkhorn distance between the two sides are
// reported; the score uses the configured one.
BaryScoreResult bary_score(std::span<const LayeredToken> ref, std::span<const LayeredToken> hyp,
                           const BaryConfig& cfg);

enum class MultiRefStrategy { kMean, kMax };

const char* to_string(MultiRefStrategy s);
MultiRefStrategy parse_multi_ref(const std::string& text);

double aggregate_multi_reference(std::span<const double> scores, MultiRefStrategy strategy);

}  // namespace otmetrics

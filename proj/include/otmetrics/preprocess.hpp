#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "otmetrics/embedding_io.hpp"
#include "otmetrics/error.hpp"

namespace otmetrics {

enum class SubwordStrategy { kFirstPiece, kAllPieces, kAverageAll };

const char* to_string(SubwordStrategy s);
SubwordStrategy parse_subword_strategy(const std::string& text);

// Python-style layer index: 0 is the shallowest stored layer, -1 the deepest.
struct SingleLayer {
  int index = -1;
  bool operator==(const SingleLayer&) const = default;
};

// Coordinate-wise power means over the last `last_k` stored layers (0 = all),
// concatenated in exponent order. Exponents may be +/-infinity (max/min).
//
// For finite exponents that are not odd integers every coordinate d is shifted
// by s_d = 1 + |min_l v_l[d]| before the mean and shifted back afterwards, so
// the mean stays real on negative inputs:
//   m_p[d] = ((sum_l (v_l[d] + s_d)^p) / L)^(1/p) - s_d
struct PowerMeans {
  std::vector<double> exponents{1.0};
  std::size_t last_k = 0;
  bool operator==(const PowerMeans&) const = default;
};

using LayerAggregation = std::variant<SingleLayer, PowerMeans>;

std::string describe(const LayerAggregation& agg);
// Accepts "layer:<i>" or "pmeans:<p1>,<p2>,...[@<last_k>]" (p may be inf/-inf).
LayerAggregation parse_layer_aggregation(const std::string& text);

struct PreprocessConfig {
  std::set<std::string> stopwords;
  std::string stopword_list_id = "none";
  bool remove_punct = false;
  SubwordStrategy subword = SubwordStrategy::kAllPieces;
  LayerAggregation layer_agg = SingleLayer{-1};
};

// Throws InvalidConfig when stopword_list_id and stopwords disagree.
void check_config(const PreprocessConfig& config);

// First piece, punctuation removed, mean of the last five layers.
PreprocessConfig mover_default_config();
// All pieces kept, punctuation kept, the ninth stored layer (index 8).
PreprocessConfig bertscore_default_config();

struct ProcessedToken {
  std::string unit;
  std::vector<double> vector;
  std::size_t source_word_index = 0;
  // Stopword / IDF lookup key: unit without a leading "##", lowercased.
  std::string key;
};

// Same filtering as ProcessedToken, but keeps the raw per-layer vectors of the
// last `last_k` layers instead of aggregating them.
struct LayeredToken {
  std::string unit;
  std::vector<std::vector<double>> layers;
  std::size_t source_word_index = 0;
  std::string key;
};

class LayerIndexOutOfRange : public Error {
 public:
  LayerIndexOutOfRange(long long index, std::size_t n_layers);
};

class NonRealResult : public Error {
 public:
  NonRealResult(double exponent, std::size_t coordinate);
};

std::vector<double> aggregate_layers(const TokenRecord& token, const LayerAggregation& agg);

std::string match_key(const std::string& surface);

std::vector<ProcessedToken> preprocess_segment(const SegmentRecord& segment,
                                               const PreprocessConfig& config);

// Layer aggregation in `config` is ignored; `last_k` selects the deepest layers.
std::vector<LayeredToken> preprocess_segment_layers(const SegmentRecord& segment,
                                                    const PreprocessConfig& config,
                                                    std::size_t last_k);

// One entry per line; trimmed, ASCII-lowercased, deduplicated, blank lines skipped.
std::set<std::string> load_stopword_list(const std::filesystem::path& path);

}  // namespace otmetrics

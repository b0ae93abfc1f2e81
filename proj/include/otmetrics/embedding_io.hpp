#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "otmetrics/error.hpp"

namespace otmetrics {

// Token-embedding interchange format.
//
// Line-delimited JSON. Line 1 is the header object, every following non-blank
// line is one segment:
//
//   {"format":"otmetrics-embeddings","version":"1","dim":2,"n_layers":1,"model_id":"..."}
//   {"segment_id":"s1","role":"reference","lang":"en","tokens":[
//      {"surface":"smart","word_index":0,"is_first_piece":true,"is_punct":false,
//       "layers":[[0.1,0.2]]}, ...]}
//
// Layers are stored shallow to deep. Continuation pieces carry a "##" prefix.

inline constexpr const char* kEmbeddingFormatName = "otmetrics-embeddings";
inline constexpr const char* kEmbeddingFormatVersion = "1";

struct EmbeddingFileHeader {
  std::size_t dim = 0;
  std::size_t n_layers = 0;
  std::string model_id;
  std::string version = kEmbeddingFormatVersion;

  bool operator==(const EmbeddingFileHeader&) const = default;
};

struct TokenRecord {
  std::string surface;
  std::size_t word_index = 0;
  bool is_first_piece = true;
  bool is_punct = false;
  std::vector<std::vector<double>> layers;

  bool operator==(const TokenRecord&) const = default;
};

enum class SegmentRole { kReference, kHypothesis };

const char* to_string(SegmentRole role);

struct SegmentRecord {
  std::string segment_id;
  SegmentRole role = SegmentRole::kReference;
  std::optional<std::string> system_id;
  std::string lang;
  std::vector<TokenRecord> tokens;

  bool operator==(const SegmentRecord&) const = default;
};

class MalformedHeader : public Error {
 public:
  explicit MalformedHeader(const std::string& detail)
      : Error(ErrorClass::kSchema, "MalformedHeader", "malformed header: " + detail) {}
};

// Structural problem in a segment line (bad JSON, missing field, bad id).
class MalformedRecord : public Error {
 public:
  MalformedRecord(std::size_t line, const std::string& record_id, const std::string& detail);
  std::size_t line() const noexcept { return line_; }
  const std::string& record_id() const noexcept { return record_id_; }

 private:
  std::size_t line_;
  std::string record_id_;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(const std::string& record_id, std::size_t token_index, std::string what,
                    std::size_t expected, std::size_t got);
  const std::string& record_id() const noexcept { return record_id_; }
  std::size_t token_index() const noexcept { return token_index_; }
  std::size_t expected() const noexcept { return expected_; }
  std::size_t got() const noexcept { return got_; }

 private:
  std::string record_id_;
  std::size_t token_index_;
  std::size_t expected_;
  std::size_t got_;
};

class BadContinuationFlag : public Error {
 public:
  BadContinuationFlag(const std::string& record_id, std::size_t token_index);
  const std::string& record_id() const noexcept { return record_id_; }
  std::size_t token_index() const noexcept { return token_index_; }

 private:
  std::string record_id_;
  std::size_t token_index_;
};

class BadWordIndex : public Error {
 public:
  BadWordIndex(const std::string& record_id, std::size_t token_index);
};

class NonFiniteValue : public Error {
 public:
  NonFiniteValue(const std::string& record_id, std::size_t token_index);
};

// Throws the first violated invariant of `segment` under `header`.
void validate_segment(const EmbeddingFileHeader& header, const SegmentRecord& segment);
void validate_header(const EmbeddingFileHeader& header);

// Streaming reader; holds at most one segment in memory.
class EmbeddingReader {
 public:
  explicit EmbeddingReader(const std::filesystem::path& path);

  const EmbeddingFileHeader& header() const noexcept { return header_; }

  // Next segment in file order, or nullopt at end of file. A malformed line
  // throws; the line is consumed, so the caller may keep reading.
  std::optional<SegmentRecord> next();

  // 1-based line number of the last line returned or rejected.
  std::size_t line_number() const noexcept { return line_number_; }

 private:
  std::ifstream in_;
  EmbeddingFileHeader header_;
  std::size_t line_number_ = 0;
};

struct EmbeddingFile {
  EmbeddingFileHeader header;
  std::vector<SegmentRecord> segments;
};

EmbeddingFile read_embedding_file(const std::filesystem::path& path);

// Validates every segment before writing anything. Vector components are
// written with 9 significant digits.
void write_embedding_file(const std::filesystem::path& path, const EmbeddingFileHeader& header,
                          const std::vector<SegmentRecord>& segments);

// Rounds to the precision used on disk, so callers can predict round-trips.
double round_to_file_precision(double value);

struct Diagnostic {
  std::size_t line = 0;
  std::string record_id;
  std::string code;
  std::string message;
  ErrorClass error_class = ErrorClass::kSchema;
};

struct ValidationReport {
  std::size_t segments_ok = 0;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return diagnostics.empty(); }
};

// Reads the whole file, collecting every violation instead of stopping at the
// first one. I/O failures and header errors are reported as a single diagnostic.
ValidationReport validate_embedding_file(const std::filesystem::path& path);

}  // namespace otmetrics

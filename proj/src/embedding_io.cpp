#include "otmetrics/embedding_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "json.hpp"

namespace otmetrics {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string token_label(const std::string& record_id, std::size_t token_index) {
  return "segment '" + record_id + "' token " + std::to_string(token_index);
}

std::size_t require_positive(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw MalformedHeader(std::string("missing field '") + key + "'");
  if (!it->is_number_integer() || it->get<long long>() < 1) {
    throw MalformedHeader(std::string("field '") + key + "' must be a positive integer");
  }
  return it->get<std::size_t>();
}

EmbeddingFileHeader parse_header(const std::string& line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw MalformedHeader(std::string("not valid JSON (") + e.what() + ")");
  }
  if (!obj.is_object()) throw MalformedHeader("header line is not a JSON object");
  if (auto it = obj.find("format"); it != obj.end()) {
    if (!it->is_string() || it->get<std::string>() != kEmbeddingFormatName) {
      throw MalformedHeader("unknown format tag");
    }
  }
  if (obj.contains("segment_id") || obj.contains("tokens")) {
    throw MalformedHeader("first line is a segment record, not a header");
  }
  EmbeddingFileHeader header;
  header.dim = require_positive(obj, "dim");
  header.n_layers = require_positive(obj, "n_layers");
  if (auto it = obj.find("model_id"); it != obj.end()) {
    if (!it->is_string()) throw MalformedHeader("field 'model_id' must be a string");
    header.model_id = it->get<std::string>();
  }
  if (auto it = obj.find("version"); it != obj.end()) {
    if (!it->is_string()) throw MalformedHeader("field 'version' must be a string");
    header.version = it->get<std::string>();
  }
  return header;
}

// Structural decoding only; invariants are checked by validate_segment.
SegmentRecord decode_segment(const std::string& line, std::size_t line_no) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw MalformedRecord(line_no, "", std::string("not valid JSON (") + e.what() + ")");
  }
  if (!obj.is_object()) throw MalformedRecord(line_no, "", "record is not a JSON object");

  SegmentRecord seg;
  auto id_it = obj.find("segment_id");
  if (id_it == obj.end() || !id_it->is_string()) {
    throw MalformedRecord(line_no, "", "missing string field 'segment_id'");
  }
  seg.segment_id = id_it->get<std::string>();
  const std::string& rid = seg.segment_id;

  auto role_it = obj.find("role");
  if (role_it == obj.end() || !role_it->is_string()) {
    throw MalformedRecord(line_no, rid, "missing string field 'role'");
  }
  const auto role = role_it->get<std::string>();
  if (role == "reference") {
    seg.role = SegmentRole::kReference;
  } else if (role == "hypothesis") {
    seg.role = SegmentRole::kHypothesis;
  } else {
    throw MalformedRecord(line_no, rid, "role must be 'reference' or 'hypothesis'");
  }
  if (auto it = obj.find("system_id"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw MalformedRecord(line_no, rid, "'system_id' must be a string");
    seg.system_id = it->get<std::string>();
  }
  if (auto it = obj.find("lang"); it != obj.end()) {
    if (!it->is_string()) throw MalformedRecord(line_no, rid, "'lang' must be a string");
    seg.lang = it->get<std::string>();
  }

  auto tokens_it = obj.find("tokens");
  if (tokens_it == obj.end() || !tokens_it->is_array()) {
    throw MalformedRecord(line_no, rid, "missing array field 'tokens'");
  }
  seg.tokens.reserve(tokens_it->size());
  std::size_t t_index = 0;
  for (const auto& tok : *tokens_it) {
    const auto where = token_label(rid, t_index);
    if (!tok.is_object()) throw MalformedRecord(line_no, rid, where + " is not an object");
    TokenRecord rec;
    auto s = tok.find("surface");
    if (s == tok.end() || !s->is_string()) {
      throw MalformedRecord(line_no, rid, where + ": missing string 'surface'");
    }
    rec.surface = s->get<std::string>();
    auto wi = tok.find("word_index");
    if (wi == tok.end() || !wi->is_number_integer() || wi->get<long long>() < 0) {
      throw MalformedRecord(line_no, rid, where + ": 'word_index' must be a non-negative integer");
    }
    rec.word_index = wi->get<std::size_t>();
    auto fp = tok.find("is_first_piece");
    if (fp == tok.end() || !fp->is_boolean()) {
      throw MalformedRecord(line_no, rid, where + ": missing boolean 'is_first_piece'");
    }
    rec.is_first_piece = fp->get<bool>();
    auto pu = tok.find("is_punct");
    if (pu == tok.end() || !pu->is_boolean()) {
      throw MalformedRecord(line_no, rid, where + ": missing boolean 'is_punct'");
    }
    rec.is_punct = pu->get<bool>();
    auto layers = tok.find("layers");
    if (layers == tok.end() || !layers->is_array()) {
      throw MalformedRecord(line_no, rid, where + ": missing array 'layers'");
    }
    rec.layers.reserve(layers->size());
    for (const auto& layer : *layers) {
      if (!layer.is_array()) throw MalformedRecord(line_no, rid, where + ": layer is not an array");
      std::vector<double> v;
      v.reserve(layer.size());
      for (const auto& x : layer) {
        if (!x.is_number()) throw MalformedRecord(line_no, rid, where + ": non-numeric component");
        v.push_back(x.get<double>());
      }
      rec.layers.push_back(std::move(v));
    }
    seg.tokens.push_back(std::move(rec));
    ++t_index;
  }
  return seg;
}

ordered_json encode_segment(const SegmentRecord& seg) {
  ordered_json obj;
  obj["segment_id"] = seg.segment_id;
  obj["role"] = to_string(seg.role);
  if (seg.system_id) obj["system_id"] = *seg.system_id;
  obj["lang"] = seg.lang;
  auto tokens = ordered_json::array();
  for (const auto& tok : seg.tokens) {
    ordered_json t;
    t["surface"] = tok.surface;
    t["word_index"] = tok.word_index;
    t["is_first_piece"] = tok.is_first_piece;
    t["is_punct"] = tok.is_punct;
    auto layers = ordered_json::array();
    for (const auto& layer : tok.layers) {
      auto v = ordered_json::array();
      for (double x : layer) v.push_back(round_to_file_precision(x));
      layers.push_back(std::move(v));
    }
    t["layers"] = std::move(layers);
    tokens.push_back(std::move(t));
  }
  obj["tokens"] = std::move(tokens);
  return obj;
}

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

const char* to_string(SegmentRole role) {
  return role == SegmentRole::kReference ? "reference" : "hypothesis";
}

MalformedRecord::MalformedRecord(std::size_t line, const std::string& record_id,
                                 const std::string& detail)
    : Error(ErrorClass::kSchema, "MalformedRecord",
            (line > 0 ? "line " + std::to_string(line) + " " : std::string()) +
                (record_id.empty() ? std::string() : "(segment '" + record_id + "')") + ": " +
                detail),
      line_(line),
      record_id_(record_id) {}

DimensionMismatch::DimensionMismatch(const std::string& record_id, std::size_t token_index,
                                     std::string what, std::size_t expected, std::size_t got)
    : Error(ErrorClass::kSchema, "DimensionMismatch",
            token_label(record_id, token_index) + ": expected " + std::to_string(expected) + " " +
                what + ", got " + std::to_string(got)),
      record_id_(record_id),
      token_index_(token_index),
      expected_(expected),
      got_(got) {}

BadContinuationFlag::BadContinuationFlag(const std::string& record_id, std::size_t token_index)
    : Error(ErrorClass::kSchema, "BadContinuationFlag",
            token_label(record_id, token_index) +
                ": is_first_piece disagrees with the '##' continuation marker"),
      record_id_(record_id),
      token_index_(token_index) {}

BadWordIndex::BadWordIndex(const std::string& record_id, std::size_t token_index)
    : Error(ErrorClass::kSchema, "BadWordIndex",
            token_label(record_id, token_index) +
                ": word_index must advance exactly at first pieces and stay put on "
                "continuation pieces") {}

NonFiniteValue::NonFiniteValue(const std::string& record_id, std::size_t token_index)
    : Error(ErrorClass::kNumeric, "NonFiniteValue",
            token_label(record_id, token_index) + ": vector component is not finite") {}

void validate_header(const EmbeddingFileHeader& header) {
  if (header.dim < 1) throw MalformedHeader("dim must be >= 1");
  if (header.n_layers < 1) throw MalformedHeader("n_layers must be >= 1");
}

void validate_segment(const EmbeddingFileHeader& header, const SegmentRecord& segment) {
  const auto& rid = segment.segment_id;
  if (rid.empty()) throw MalformedRecord(0, rid, "segment_id must be non-empty");
  if (segment.role == SegmentRole::kHypothesis && (!segment.system_id || segment.system_id->empty())) {
    throw MalformedRecord(0, rid, "hypothesis records must carry a system_id");
  }
  for (std::size_t i = 0; i < segment.tokens.size(); ++i) {
    const auto& tok = segment.tokens[i];
    const bool marked = tok.surface.rfind("##", 0) == 0;
    if (tok.is_first_piece == marked) throw BadContinuationFlag(rid, i);
    if (i == 0) {
      if (!tok.is_first_piece) throw BadWordIndex(rid, i);
    } else {
      const auto prev = segment.tokens[i - 1].word_index;
      const bool ok = tok.is_first_piece ? tok.word_index > prev : tok.word_index == prev;
      if (!ok) throw BadWordIndex(rid, i);
    }
    if (tok.layers.size() != header.n_layers) {
      throw DimensionMismatch(rid, i, "layers", header.n_layers, tok.layers.size());
    }
    for (const auto& layer : tok.layers) {
      if (layer.size() != header.dim) throw DimensionMismatch(rid, i, "components", header.dim, layer.size());
      for (double x : layer) {
        if (!std::isfinite(x)) throw NonFiniteValue(rid, i);
      }
    }
  }
}

EmbeddingReader::EmbeddingReader(const std::filesystem::path& path) : in_(path) {
  if (!in_) throw IoError("cannot open embedding file '" + path.string() + "'");
  std::string line;
  while (std::getline(in_, line)) {
    ++line_number_;
    if (!is_blank(line)) break;
  }
  if (is_blank(line)) throw MalformedHeader("file is empty");
  header_ = parse_header(line);
}

std::optional<SegmentRecord> EmbeddingReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_number_;
    if (is_blank(line)) continue;
    auto seg = decode_segment(line, line_number_);
    validate_segment(header_, seg);
    return seg;
  }
  if (in_.bad()) throw IoError("read failure at line " + std::to_string(line_number_));
  return std::nullopt;
}

EmbeddingFile read_embedding_file(const std::filesystem::path& path) {
  EmbeddingReader reader(path);
  EmbeddingFile file{reader.header(), {}};
  while (auto seg = reader.next()) file.segments.push_back(std::move(*seg));
  return file;
}

double round_to_file_precision(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return std::strtod(buf, nullptr);
}

void write_embedding_file(const std::filesystem::path& path, const EmbeddingFileHeader& header,
                          const std::vector<SegmentRecord>& segments) {
  validate_header(header);
  for (const auto& seg : segments) validate_segment(header, seg);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  ordered_json h;
  h["format"] = kEmbeddingFormatName;
  h["version"] = header.version;
  h["dim"] = header.dim;
  h["n_layers"] = header.n_layers;
  h["model_id"] = header.model_id;
  out << h.dump() << '\n';
  for (const auto& seg : segments) out << encode_segment(seg).dump() << '\n';
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

ValidationReport validate_embedding_file(const std::filesystem::path& path) {
  ValidationReport report;
  std::optional<EmbeddingReader> reader;
  try {
    reader.emplace(path);
  } catch (const Error& e) {
    report.diagnostics.push_back({0, "", e.code(), e.what(), e.error_class()});
    return report;
  }
  for (;;) {
    try {
      auto seg = reader->next();
      if (!seg) break;
      ++report.segments_ok;
    } catch (const Error& e) {
      Diagnostic d{reader->line_number(), "", e.code(), e.what(), e.error_class()};
      if (const auto* m = dynamic_cast<const MalformedRecord*>(&e)) d.record_id = m->record_id();
      if (const auto* m = dynamic_cast<const DimensionMismatch*>(&e)) d.record_id = m->record_id();
      if (const auto* m = dynamic_cast<const BadContinuationFlag*>(&e)) d.record_id = m->record_id();
      d.message = "line " + std::to_string(d.line) + ": " + d.message;
      report.diagnostics.push_back(std::move(d));
      if (e.error_class() == ErrorClass::kIo) break;
    }
  }
  return report;
}

}  // namespace otmetrics

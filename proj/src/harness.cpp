#include "otmetrics/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "otmetrics/log.hpp"

namespace otmetrics {

const char* to_string(JudgmentKind kind) {
  switch (kind) {
    case JudgmentKind::kDirectAssessment:
      return "da";
    case JudgmentKind::kRelativeRanking:
      return "darr";
    case JudgmentKind::kSummaryCriterion:
      return "summary";
  }
  return "?";
}

JudgmentKind parse_judgment_kind(const std::string& text) {
  if (text == "da") return JudgmentKind::kDirectAssessment;
  if (text == "darr") return JudgmentKind::kRelativeRanking;
  if (text == "summary") return JudgmentKind::kSummaryCriterion;
  throw InvalidConfig("judgment kind must be da, darr or summary, got '" + text + "'");
}

JudgmentSchema JudgmentSchema::defaults(JudgmentKind kind) {
  JudgmentSchema s;
  s.kind = kind;
  s.segment_column = kind == JudgmentKind::kSummaryCriterion ? "summary_id" : "segment_id";
  return s;
}

std::vector<std::string> split_delimited(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == delim) {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

namespace {

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::optional<double> parse_finite(const std::string& text) {
  double v = 0.0;
  const char* b = text.data();
  const char* e = b + text.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\t')) --e;
  if (b < e && *b == '+') ++b;
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

JudgmentDataset load_judgments(const std::filesystem::path& path, const JudgmentSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open judgment file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw MissingColumn(schema.segment_column);
  line = strip_cr(line);
  const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
  const auto header = split_delimited(line, delim);

  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col.emplace(header[i], i);

  const bool ranked = schema.kind == JudgmentKind::kRelativeRanking;
  const bool summary = schema.kind == JudgmentKind::kSummaryCriterion;
  const std::string seg_col =
      schema.segment_column.empty() ? JudgmentSchema::defaults(schema.kind).segment_column : schema.segment_column;
  std::vector<std::string> wanted{seg_col};
  if (ranked) {
    wanted.push_back(schema.better_column);
    wanted.push_back(schema.worse_column);
  } else {
    wanted.push_back(schema.system_column);
    wanted.push_back(schema.score_column);
    if (summary && schema.criterion) wanted.push_back(schema.criterion_column);
  }
  std::vector<std::size_t> at;
  for (const auto& name : wanted) {
    const auto it = col.find(name);
    if (it == col.end()) throw MissingColumn(name);
    at.push_back(it->second);
  }

  JudgmentDataset ds;
  ds.kind = schema.kind;
  ds.lang_pair = schema.lang_pair;
  ds.criterion = schema.criterion.value_or("");
  for (const auto& h : header) {
    if (std::find(wanted.begin(), wanted.end(), h) == wanted.end()) {
      ds.notices.push_back("ignoring column '" + h + "'");
      log_info("judgments: ignoring column '" + h + "' in " + path.string());
    }
  }

  std::set<PairKey> seen;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_delimited(line, delim);
    auto get = [&](std::size_t k) -> const std::string& {
      if (at[k] >= fields.size()) {
        throw Error(ErrorClass::kSchema, "MalformedRow",
                    "row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                        " fields, column '" + wanted[k] + "' is missing");
      }
      return fields[at[k]];
    };
    if (ranked) {
      ds.ranked.push_back({get(0), get(1), get(2)});
      continue;
    }
    if (summary && schema.criterion && get(3) != *schema.criterion) continue;
    const auto score = parse_finite(get(2));
    if (!score) throw NonNumericScore(row, get(2));
    PairKey key{get(0), get(1)};
    if (!seen.insert(key).second) throw DuplicateJudgment(key.first, key.second);
    ds.scored.push_back({key.first, key.second, *score});
  }
  return ds;
}

// ---------------------------------------------------------------------------

void EmbeddingCorpus::check_header(const EmbeddingFileHeader& header) {
  if (!header_) {
    header_ = header;
    return;
  }
  if (header_->dim != header.dim || header_->n_layers != header.n_layers) {
    throw MalformedHeader("embedding files disagree on shape: dim " + std::to_string(header_->dim) +
                          " x " + std::to_string(header_->n_layers) + " layers vs dim " +
                          std::to_string(header.dim) + " x " + std::to_string(header.n_layers));
  }
  if (header_->model_id != header.model_id) {
    log_warn("embedding files come from different models: '" + header_->model_id + "' and '" +
             header.model_id + "'");
  }
}

void EmbeddingCorpus::add(SegmentRecord segment, const EmbeddingFileHeader& header) {
  if (segment.role == SegmentRole::kReference) {
    add_as_reference(std::move(segment), header);
  } else {
    add_as_hypothesis(std::move(segment), header, "");
  }
}

void EmbeddingCorpus::add_as_reference(SegmentRecord segment, const EmbeddingFileHeader& header) {
  check_header(header);
  const std::size_t idx = segments_.size();
  refs_[segment.segment_id].push_back(idx);
  ref_order_.push_back(idx);
  segments_.push_back(std::move(segment));
}

void EmbeddingCorpus::add_as_hypothesis(SegmentRecord segment, const EmbeddingFileHeader& header,
                                        const std::string& default_system) {
  check_header(header);
  if (!segment.system_id || segment.system_id->empty()) {
    if (default_system.empty()) {
      throw MalformedRecord(0, segment.segment_id, "hypothesis without system_id");
    }
    segment.system_id = default_system;
  }
  const std::size_t idx = segments_.size();
  PairKey key{segment.segment_id, *segment.system_id};
  if (!hyps_.emplace(key, idx).second) {
    throw DuplicateSegment("two hypotheses for segment '" + key.first + "', system '" + key.second + "'");
  }
  hyp_order_.push_back(idx);
  segments_.push_back(std::move(segment));
}

EmbeddingCorpus EmbeddingCorpus::from_file(const std::filesystem::path& path) {
  auto file = read_embedding_file(path);
  EmbeddingCorpus c;
  c.check_header(file.header);
  for (auto& s : file.segments) c.add(std::move(s), file.header);
  return c;
}

const std::vector<std::size_t>& EmbeddingCorpus::references_of(const std::string& segment_id) const {
  const auto it = refs_.find(segment_id);
  if (it == refs_.end()) throw MissingEmbedding(segment_id, "");
  return it->second;
}

std::optional<std::size_t> EmbeddingCorpus::hypothesis(const PairKey& key) const {
  const auto it = hyps_.find(key);
  if (it == hyps_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------

std::map<std::string, std::size_t> ScoreRun::skip_reasons() const {
  std::map<std::string, std::size_t> out;
  for (const auto& s : skips) ++out[s.reason];
  return out;
}

namespace {

std::vector<std::string> keys_of(const std::vector<ProcessedToken>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.key);
  return out;
}

// Bary ignores IDF, so it never asks for documents.
std::vector<std::vector<std::string>> documents(const EmbeddingCorpus& corpus,
                                                const std::vector<std::size_t>& which,
                                                const PreprocessConfig& prep) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(which.size());
  for (auto i : which) docs.push_back(keys_of(preprocess_segment(corpus.segments()[i], prep)));
  return docs;
}

std::vector<std::size_t> all_indices(const EmbeddingCorpus& corpus) {
  std::vector<std::size_t> out(corpus.segments().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

}  // namespace

std::pair<IdfTable, IdfTable> build_idf_tables(const EmbeddingCorpus& corpus, const ScoreRequest& request) {
  if (!uses_idf(request.metric) || std::holds_alternative<IdfDisabled>(request.idf)) {
    return {IdfTable::disabled(), IdfTable::disabled()};
  }
  if (const auto* sampled = std::get_if<IdfSampledCorpus>(&request.idf)) {
    const auto pool = all_indices(corpus);
    if (pool.size() < sampled->k) throw PoolTooSmall(pool.size(), sampled->k);
    const auto picked = sample_idf_corpus(pool, sampled->k, sampled->seed);
    auto t = build_idf(documents(corpus, picked, request.prep), request.idf);
    t.set_scope(IdfScope::kSingleCorpus);
    return {t, t};
  }
  if (const auto* ext = std::get_if<IdfExternalCorpus>(&request.idf)) {
    auto t = build_idf(load_idf_corpus(ext->path), request.idf);
    t.set_scope(IdfScope::kSingleCorpus);
    return {t, t};
  }
  switch (request.metric.idf_scope) {
    case IdfScope::kRefAndHypSeparate: {
      auto r = build_idf(documents(corpus, corpus.reference_indices(), request.prep), request.idf);
      auto h = build_idf(documents(corpus, corpus.hypothesis_indices(), request.prep), request.idf);
      r.set_scope(IdfScope::kRefAndHypSeparate);
      h.set_scope(IdfScope::kRefAndHypSeparate);
      return {r, h};
    }
    case IdfScope::kRefOnly: {
      auto r = build_idf(documents(corpus, corpus.reference_indices(), request.prep), request.idf);
      r.set_scope(IdfScope::kRefOnly);
      return {r, r};
    }
    case IdfScope::kSingleCorpus: {
      auto t = build_idf(documents(corpus, all_indices(corpus), request.prep), request.idf);
      t.set_scope(IdfScope::kSingleCorpus);
      return {t, t};
    }
  }
  throw InvalidConfig("unknown IDF scope");
}

namespace {

struct PairOutcome {
  double score = 0.0;
  std::optional<double> raw;
  std::size_t zero_tokens = 0;
  bool nonconverged = false;
};

class PairScorer {
 public:
  PairScorer(const EmbeddingCorpus& corpus, const ScoreRequest& request)
      : corpus_(corpus), request_(request) {
    check_metric_config(request.metric);
    check_config(request.prep);
    std::tie(idf_ref_, idf_hyp_) = build_idf_tables(corpus, request);
  }

  PairOutcome score(std::size_t ref_idx, std::size_t hyp_idx) {
    PairOutcome out;
    const auto& kind = request_.metric.kind;
    if (const auto* bary = std::get_if<BaryConfig>(&kind)) {
      const auto& r = layered(ref_idx, bary->n_layers_used);
      const auto& h = layered(hyp_idx, bary->n_layers_used);
      const auto res = bary_score(r, h, *bary);
      out.score = res.pair.score;
      out.raw = res.pair.raw_distance;
      out.nonconverged = !res.barycenters_converged ||
                         (bary->distance == BaryDistance::kSinkhorn && !res.sinkhorn_converged);
      return out;
    }
    const auto& r = processed(ref_idx);
    const auto& h = processed(hyp_idx);
    if (const auto* mover = std::get_if<MoverConfig>(&kind)) {
      const auto p = mover_score(r, h, idf_ref_, idf_hyp_, mover->n);
      out.score = p.score;
      out.raw = p.raw_distance;
      return out;
    }
    const auto& bert = std::get<BertScoreConfig>(kind);
    const auto res = bert_score(r, h, idf_ref_, bert.idf_on_hypothesis ? &idf_hyp_ : nullptr);
    out.score = to_scored_pair(res, bert.variant).score;
    out.zero_tokens = res.zero_vector_tokens;
    return out;
  }

 private:
  const std::vector<ProcessedToken>& processed(std::size_t idx) {
    auto it = processed_.find(idx);
    if (it == processed_.end()) {
      it = processed_.emplace(idx, preprocess_segment(corpus_.segments()[idx], request_.prep)).first;
    }
    return it->second;
  }

  const std::vector<LayeredToken>& layered(std::size_t idx, std::size_t last_k) {
    auto it = layered_.find(idx);
    if (it == layered_.end()) {
      it = layered_.emplace(idx, preprocess_segment_layers(corpus_.segments()[idx], request_.prep, last_k))
               .first;
    }
    return it->second;
  }

  const EmbeddingCorpus& corpus_;
  const ScoreRequest& request_;
  IdfTable idf_ref_, idf_hyp_;
  std::map<std::size_t, std::vector<ProcessedToken>> processed_;
  std::map<std::size_t, std::vector<LayeredToken>> layered_;
};

std::vector<PairKey> pairs_to_score(const EmbeddingCorpus& corpus, const JudgmentDataset* judgments) {
  std::set<PairKey> keys;
  if (!judgments) {
    for (auto i : corpus.hypothesis_indices()) {
      const auto& s = corpus.segments()[i];
      keys.emplace(s.segment_id, s.system_id.value_or(""));
    }
  } else if (judgments->kind == JudgmentKind::kRelativeRanking) {
    for (const auto& j : judgments->ranked) {
      keys.emplace(j.segment_id, j.better_system);
      keys.emplace(j.segment_id, j.worse_system);
    }
  } else {
    for (const auto& j : judgments->scored) keys.emplace(j.segment_id, j.system_id);
  }
  return {keys.begin(), keys.end()};
}

}  // namespace

ScoreRun score_dataset(const EmbeddingCorpus& corpus, const JudgmentDataset* judgments,
                       const ScoreRequest& request) {
  const auto keys = pairs_to_score(corpus, judgments);
  // Fail fast on missing embeddings before any scoring work.
  for (const auto& key : keys) {
    if (!corpus.hypothesis(key)) throw MissingEmbedding(key.first, key.second);
    corpus.references_of(key.first);
  }

  PairScorer scorer(corpus, request);
  const std::string label = metric_label(request.metric);
  ScoreRun run;
  for (const auto& key : keys) {
    const std::size_t hyp = *corpus.hypothesis(key);
    std::vector<double> scores, raws;
    std::optional<SkipRecord> skip;
    for (auto ref : corpus.references_of(key.first)) {
      try {
        const auto o = scorer.score(ref, hyp);
        scores.push_back(o.score);
        if (o.raw) raws.push_back(*o.raw);
        run.zero_vector_tokens += o.zero_tokens;
        run.solver_nonconvergence = run.solver_nonconvergence || o.nonconverged;
      } catch (const MetricSkip& e) {
        skip = SkipRecord{key.first, key.second, e.reason(), e.what()};
        break;
      }
    }
    if (skip) {
      run.skips.push_back(std::move(*skip));
      continue;
    }
    ScoredPair p;
    p.segment_id = key.first;
    p.system_id = key.second;
    p.metric_label = label;
    p.score = aggregate_multi_reference(scores, request.multi_ref);
    if (raws.size() == scores.size() && !raws.empty()) {
      if (request.multi_ref == MultiRefStrategy::kMax) {
        const auto best = std::max_element(scores.begin(), scores.end()) - scores.begin();
        p.raw_distance = raws[static_cast<std::size_t>(best)];
      } else {
        p.raw_distance = aggregate_multi_reference(raws, MultiRefStrategy::kMean);
      }
    }
    run.scores.push_back(std::move(p));
  }
  if (run.zero_vector_tokens > 0) {
    log_warn(label + ": " + std::to_string(run.zero_vector_tokens) +
             " zero-vector token(s) scored with cosine 0");
  }
  return run;
}

// ---------------------------------------------------------------------------

const char* to_string(Level level) {
  switch (level) {
    case Level::kSegment:
      return "segment";
    case Level::kSystem:
      return "system";
    case Level::kSummary:
      return "summary";
  }
  return "?";
}

Level parse_level(const std::string& text) {
  if (text == "segment") return Level::kSegment;
  if (text == "system") return Level::kSystem;
  if (text == "summary") return Level::kSummary;
  throw InvalidConfig("level must be segment, system or summary, got '" + text + "'");
}

CorrelationResult correlate(const ScoreRun& run, const JudgmentDataset& judgments, Level level,
                            TieRule tie_rule) {
  std::map<PairKey, double> metric;
  for (const auto& s : run.scores) metric.emplace(PairKey{s.segment_id, s.system_id}, s.score);

  CorrelationResult out;
  out.level = level;

  if (judgments.kind == JudgmentKind::kRelativeRanking) {
    if (level != Level::kSegment) {
      throw InvalidConfig(std::string("relative-ranking judgments only support segment level, not ") +
                          to_string(level));
    }
    std::vector<RelativeJudgment> items;
    for (const auto& j : judgments.ranked) {
      const auto b = metric.find({j.segment_id, j.better_system});
      const auto w = metric.find({j.segment_id, j.worse_system});
      if (b == metric.end() || w == metric.end()) {
        ++out.n_excluded;
        continue;
      }
      items.push_back({b->second, w->second});
    }
    out.primary_stat = "wmt_kendall";
    out.primary = wmt_kendall_like(items, tie_rule);
    out.values["wmt_kendall"] = out.primary;
    out.n_items = items.size();
    return out;
  }

  std::vector<double> x, y;
  std::vector<std::string> systems;
  for (const auto& j : judgments.scored) {
    const auto it = metric.find({j.segment_id, j.system_id});
    if (it == metric.end()) {
      ++out.n_excluded;
      continue;
    }
    x.push_back(it->second);
    y.push_back(j.score);
    systems.push_back(j.system_id);
  }

  switch (level) {
    case Level::kSegment: {
      out.primary_stat = "abs_pearson";
      out.values["pearson"] = pearson(x, y);
      out.primary = std::fabs(out.values["pearson"]);
      out.values["abs_pearson"] = out.primary;
      out.n_items = x.size();
      break;
    }
    case Level::kSystem: {
      std::map<std::string, std::pair<double, double>> sums;
      std::map<std::string, std::size_t> counts;
      for (std::size_t i = 0; i < x.size(); ++i) {
        auto& s = sums[systems[i]];
        s.first += x[i];
        s.second += y[i];
        ++counts[systems[i]];
      }
      std::vector<double> mx, my;
      for (const auto& [sys, s] : sums) {
        const auto n = static_cast<double>(counts[sys]);
        mx.push_back(s.first / n);
        my.push_back(s.second / n);
      }
      out.primary_stat = "pearson";
      out.primary = pearson(mx, my);
      out.values["pearson"] = out.primary;
      out.n_items = mx.size();
      break;
    }
    case Level::kSummary: {
      out.primary_stat = "pearson";
      out.primary = pearson(x, y);
      out.values["pearson"] = out.primary;
      out.values["spearman"] = spearman(x, y);
      out.values["kendall_tau_b"] = kendall_tau_b(x, y);
      out.n_items = x.size();
      break;
    }
  }
  return out;
}

}  // namespace otmetrics

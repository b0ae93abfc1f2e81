#include "otmetrics/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>
#include <tuple>

#include <CLI11.hpp>
#include <json.hpp>

#include "otmetrics/error.hpp"
#include "otmetrics/harness.hpp"
#include "otmetrics/log.hpp"
#include "otmetrics/sweep.hpp"

namespace otmetrics {

using ojson = nlohmann::ordered_json;

namespace {

struct ScoreOptions {
  std::string refs, hyps;
  std::string metric = "mover";
  int n = 1;
  std::string variant = "F1";
  std::string bary_distance = "W";
  double epsilon = 0.01;
  std::size_t bary_layers = 5;
  std::string stopwords = "none";
  std::string subword;
  std::string remove_punct;
  std::string layer_agg;
  std::string idf = "ori";
  std::string idf_scope;
  std::string multi_ref = "mean";
  std::string out;
  std::string format = "csv";
};

struct SweepOptions {
  std::string grid, embeddings, judgments, out;
};

std::size_t parse_threads(const std::string& text) {
  if (text == "auto") return std::max(1u, std::thread::hardware_concurrency());
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || v < 1) throw InvalidConfig("--threads must be a positive integer or auto");
  return static_cast<std::size_t>(v);
}

bool parse_yes_no(const std::string& text, const char* flag) {
  if (text == "yes" || text == "true" || text == "on") return true;
  if (text == "no" || text == "false" || text == "off") return false;
  throw InvalidConfig(std::string(flag) + " must be yes or no, got '" + text + "'");
}

IdfMode parse_idf_flag(const std::string& text, std::uint64_t seed) {
  if (text == "ori" || text == "original") return IdfOriginal{};
  if (text == "dis" || text == "disabled") return IdfDisabled{};
  if (text.rfind("rand:", 0) == 0) {
    const auto k = text.substr(5);
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(k, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != k.size() || v == 0) throw InvalidConfig("--idf rand:K needs a positive K");
    return IdfSampledCorpus{static_cast<std::size_t>(v), seed};
  }
  if (text.rfind("file:", 0) == 0) return IdfExternalCorpus{text.substr(5)};
  throw InvalidConfig("--idf must be ori, dis, rand:K or file:PATH, got '" + text + "'");
}

ScoreRequest build_request(const ScoreOptions& o, std::uint64_t seed) {
  ScoreRequest req;
  if (o.metric == "mover") {
    req.metric.kind = MoverConfig{o.n};
  } else if (o.metric == "bertscore") {
    BertScoreConfig b;
    if (o.variant == "P") {
      b.variant = BertVariant::kPrecision;
    } else if (o.variant == "R") {
      b.variant = BertVariant::kRecall;
    } else if (o.variant == "F1") {
      b.variant = BertVariant::kF1;
    } else {
      throw InvalidConfig("--variant must be P, R or F1");
    }
    req.metric.kind = b;
  } else if (o.metric == "bary") {
    BaryConfig b;
    if (o.bary_distance != "W" && o.bary_distance != "S") throw InvalidConfig("--bary-distance must be W or S");
    b.distance = o.bary_distance == "W" ? BaryDistance::kWasserstein : BaryDistance::kSinkhorn;
    b.epsilon = o.epsilon;
    b.n_layers_used = o.bary_layers;
    req.metric.kind = b;
  } else {
    throw InvalidConfig("--metric must be mover, bertscore or bary");
  }
  check_metric_config(req.metric);
  req.metric.idf_scope = o.idf_scope.empty() ? default_idf_scope(req.metric) : parse_idf_scope(o.idf_scope);

  req.prep = default_preprocess(req.metric);
  if (o.stopwords != "none") {
    req.prep.stopwords = load_stopword_list(o.stopwords);
    req.prep.stopword_list_id = std::filesystem::path(o.stopwords).stem().string();
  }
  if (!o.subword.empty()) req.prep.subword = parse_subword_strategy(o.subword);
  if (!o.remove_punct.empty()) req.prep.remove_punct = parse_yes_no(o.remove_punct, "--remove-punct");
  if (!o.layer_agg.empty()) req.prep.layer_agg = parse_layer_aggregation(o.layer_agg);
  req.idf = parse_idf_flag(o.idf, seed);
  req.multi_ref = parse_multi_ref(o.multi_ref);
  return req;
}

ojson request_json(const ScoreRequest& req, const ScoreOptions& o, std::uint64_t seed) {
  ojson j;
  j["refs"] = o.refs;
  j["hyps"] = o.hyps;
  ojson m;
  m["label"] = metric_label(req.metric);
  if (const auto* mv = std::get_if<MoverConfig>(&req.metric.kind)) {
    m["type"] = "mover";
    m["n"] = mv->n;
  } else if (const auto* b = std::get_if<BertScoreConfig>(&req.metric.kind)) {
    m["type"] = "bertscore";
    m["variant"] = o.variant;
    m["idf_on_hypothesis"] = b->idf_on_hypothesis;
  } else {
    const auto& bary = std::get<BaryConfig>(req.metric.kind);
    m["type"] = "bary";
    m["distance"] = o.bary_distance;
    m["epsilon"] = bary.epsilon;
    m["layers"] = bary.n_layers_used;
    m["max_iter"] = bary.max_iter;
    m["tol"] = bary.tol;
  }
  m["idf_scope"] = to_string(req.metric.idf_scope);
  j["metric"] = m;
  j["preprocess"] = {{"stopwords", req.prep.stopword_list_id},
                     {"stopwords_path", o.stopwords},
                     {"stopword_count", req.prep.stopwords.size()},
                     {"subword", to_string(req.prep.subword)},
                     {"remove_punct", req.prep.remove_punct},
                     {"layer_agg", describe(req.prep.layer_agg)},
                     {"filter_order", "subword,punctuation,stopwords"}};
  j["idf"] = uses_idf(req.metric) ? describe(req.idf) : "unused";
  j["multi_ref"] = to_string(req.multi_ref);
  j["seed"] = seed;
  return j;
}

// Records of `path` with role `role`; every record when the file has none of that role.
std::vector<SegmentRecord> side_records(const EmbeddingFile& file, SegmentRole role) {
  std::vector<SegmentRecord> out;
  for (const auto& s : file.segments) {
    if (s.role == role) out.push_back(s);
  }
  if (out.empty()) out = file.segments;
  return out;
}

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f << text;
  if (!f) throw IoError("write failed for " + path);
}

int cmd_validate(const std::string& path, std::ostream& out, std::ostream& err) {
  const auto report = validate_embedding_file(path);
  for (const auto& d : report.diagnostics) {
    err << d.code << ": " << d.message << '\n';
  }
  if (report.ok()) {
    out << path << ": ok, " << report.segments_ok << " segments\n";
    return 0;
  }
  out << path << ": " << report.diagnostics.size() << " problem(s), " << report.segments_ok
      << " valid segments\n";
  return static_cast<int>(report.diagnostics.front().error_class);
}

int cmd_score(const ScoreOptions& o, std::uint64_t seed, std::ostream& out) {
  const auto req = build_request(o, seed);
  if (o.format != "csv" && o.format != "json") throw InvalidConfig("--format must be json or csv");

  EmbeddingCorpus corpus;
  const auto refs = read_embedding_file(o.refs);
  const auto hyps = o.hyps == o.refs ? refs : read_embedding_file(o.hyps);
  for (auto& s : side_records(refs, SegmentRole::kReference)) corpus.add_as_reference(std::move(s), refs.header);
  const auto default_system = std::filesystem::path(o.hyps).stem().string();
  for (auto& s : side_records(hyps, SegmentRole::kHypothesis)) {
    corpus.add_as_hypothesis(std::move(s), hyps.header, default_system);
  }

  const auto run = score_dataset(corpus, nullptr, req);
  struct Row {
    std::string segment, system;
    std::optional<double> score, raw;
    std::string skip;
  };
  std::vector<Row> rows;
  for (const auto& p : run.scores) rows.push_back({p.segment_id, p.system_id, p.score, p.raw_distance, ""});
  for (const auto& s : run.skips) rows.push_back({s.segment_id, s.system_id, std::nullopt, std::nullopt, s.reason});
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.segment, a.system) < std::tie(b.segment, b.system);
  });

  const auto label = metric_label(req.metric);
  const auto config = request_json(req, o, seed);
  std::string text;
  if (o.format == "csv") {
    std::ostringstream s;
    s << "# " << kToolName << ' ' << kToolVersion << "\n# config " << config.dump() << '\n';
    s << "segment_id,system_id,metric,score,raw_distance,skip_reason\n";
    for (const auto& r : rows) {
      s << csv_field(r.segment) << ',' << csv_field(r.system) << ',' << label << ','
        << (r.score ? num(*r.score) : "") << ',' << (r.raw ? num(*r.raw) : "") << ',' << r.skip << '\n';
    }
    text = s.str();
  } else {
    ojson j;
    j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
    j["config"] = config;
    ojson arr = ojson::array();
    for (const auto& r : rows) {
      ojson e;
      e["segment_id"] = r.segment;
      e["system_id"] = r.system;
      e["metric"] = label;
      e["score"] = r.score ? ojson(*r.score) : ojson(nullptr);
      e["raw_distance"] = r.raw ? ojson(*r.raw) : ojson(nullptr);
      e["skip_reason"] = r.skip.empty() ? ojson(nullptr) : ojson(r.skip);
      arr.push_back(e);
    }
    j["rows"] = arr;
    ojson reasons = ojson::object();
    for (const auto& [k, n] : run.skip_reasons()) reasons[k] = n;
    j["skipped"] = {{"total", run.skips.size()}, {"reasons", reasons}};
    text = j.dump(2) + "\n";
  }
  emit(text, o.out, out);
  return 0;
}

int cmd_sweep(const SweepOptions& o, std::optional<std::uint64_t> seed, std::size_t threads, std::ostream& out) {
  auto grid = load_grid(o.grid);
  if (seed) grid.seed = *seed;
  const auto corpus = EmbeddingCorpus::from_file(o.embeddings);
  const auto judgments = load_judgments(o.judgments, grid.judgments);
  log_info("sweep: " + std::to_string(judgments.size()) + " judgments, " +
           std::to_string(corpus.segments().size()) + " segments, " + std::to_string(threads) + " thread(s)");

  auto report = run_sweep(grid, corpus, judgments, threads);
  report.inputs = {{"grid", o.grid}, {"embeddings", o.embeddings}, {"judgments", o.judgments}};
  write_report_files(report, o.out);

  out << report.cells.size() << " cells, " << report.failed_cells << " failed, " << report.skipped_pairs
      << " skipped pairs; report written to " << o.out << '\n';
  return report.all_failed() ? kExitSweepFailed : 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optimal-transport and alignment metrics over token embeddings", "otmetrics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::optional<std::uint64_t> seed;
  std::string threads_text = "1";
  auto add_globals = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Seed for sampled IDF corpora (default 0, or the grid's seed)");
    sub->add_option("--threads", threads_text, "Worker threads for sweep cells, or auto");
  };

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check an embedding file");
  validate->add_option("embeddings", validate_path, "Embedding file")->required();

  ScoreOptions so;
  auto* score = app.add_subcommand("score", "Score hypotheses against references");
  score->add_option("--refs", so.refs, "Reference embedding file")->required();
  score->add_option("--hyps", so.hyps, "Hypothesis embedding file")->required();
  score->add_option("--metric", so.metric, "mover | bertscore | bary")->capture_default_str();
  score->add_option("--n", so.n, "MoverScore n-gram size (1 or 2)")->capture_default_str();
  score->add_option("--variant", so.variant, "BERTScore variant: P | R | F1")->capture_default_str();
  score->add_option("--bary-distance", so.bary_distance, "BaryScore distance: W | S")->capture_default_str();
  score->add_option("--epsilon", so.epsilon, "BaryScore entropic regularization")->capture_default_str();
  score->add_option("--bary-layers", so.bary_layers, "BaryScore layers used")->capture_default_str();
  score->add_option("--stopwords", so.stopwords, "Stopword list file, or none")->capture_default_str();
  score->add_option("--subword", so.subword, "first | all | ave-all (default: metric's)");
  score->add_option("--remove-punct", so.remove_punct, "yes | no (default: metric's)");
  score->add_option("--layer-agg", so.layer_agg, "layer:<i> | pmeans:<p,...>[@k] (default: metric's)");
  score->add_option("--idf", so.idf, "ori | dis | rand:K | file:PATH")->capture_default_str();
  score->add_option("--idf-scope", so.idf_scope, "ref-and-hyp | ref-only | single (default: metric's)");
  score->add_option("--multi-ref", so.multi_ref, "mean | max")->capture_default_str();
  score->add_option("--out", so.out, "Output file (default stdout)");
  score->add_option("--format", so.format, "csv | json")->capture_default_str();
  add_globals(score);

  SweepOptions wo;
  auto* sweep = app.add_subcommand("sweep", "Run a preprocessing sensitivity sweep");
  sweep->add_option("--grid", wo.grid, "Grid file (JSON)")->required();
  sweep->add_option("--embeddings", wo.embeddings, "Embedding file")->required();
  sweep->add_option("--judgments", wo.judgments, "Judgment CSV/TSV")->required();
  sweep->add_option("--out", wo.out, "Output directory")->required();
  add_globals(sweep);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return static_cast<int>(ErrorClass::kUsage);
  }

  try {
    if (validate->parsed()) return cmd_validate(validate_path, out, err);
    const auto threads = parse_threads(threads_text);
    if (score->parsed()) return cmd_score(so, seed.value_or(0), out);
    return cmd_sweep(wo, seed, threads, out);
  } catch (const Error& e) {
    err << e.code() << ": " << e.what() << '\n';
    return static_cast<int>(e.error_class());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorClass::kIo);
  }
}

}  // namespace otmetrics

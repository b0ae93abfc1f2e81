#include "otmetrics/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "otmetrics/log.hpp"

namespace otmetrics {

using ojson = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// Grid parsing

void expect_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                 const std::string& where) {
  if (!obj.is_object()) throw GridError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw GridError("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
T get_or(const nlohmann::json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw GridError("key '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

const nlohmann::json& array_at(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key)) throw GridError(std::string("grid is missing '") + key + "'");
  const auto& a = doc.at(key);
  if (!a.is_array()) throw GridError(std::string("'") + key + "' must be an array");
  return a;
}

BertVariant parse_variant(const std::string& v) {
  if (v == "P") return BertVariant::kPrecision;
  if (v == "R") return BertVariant::kRecall;
  if (v == "F1") return BertVariant::kF1;
  throw InvalidConfig("BERTScore variant must be P, R or F1, got '" + v + "'");
}

const char* variant_name(BertVariant v) {
  switch (v) {
    case BertVariant::kPrecision:
      return "P";
    case BertVariant::kRecall:
      return "R";
    case BertVariant::kF1:
      return "F1";
  }
  return "?";
}

MetricSetting parse_metric(const nlohmann::json& j, std::size_t i) {
  const std::string where = "metrics[" + std::to_string(i) + "]";
  const auto type = get_or<std::string>(j, "type", "", where);
  MetricSetting m;
  if (type == "mover") {
    expect_keys(j, {"type", "label", "n", "idf_scope", "layer_agg"}, where);
    m.config.kind = MoverConfig{get_or<int>(j, "n", 1, where)};
  } else if (type == "bertscore") {
    expect_keys(j, {"type", "label", "variant", "idf_on_hypothesis", "idf_scope", "layer_agg"}, where);
    BertScoreConfig b;
    b.variant = parse_variant(get_or<std::string>(j, "variant", "F1", where));
    b.idf_on_hypothesis = get_or<bool>(j, "idf_on_hypothesis", false, where);
    m.config.kind = b;
  } else if (type == "bary") {
    expect_keys(j, {"type", "label", "distance", "epsilon", "layers", "max_iter", "tol", "idf_scope"}, where);
    BaryConfig b;
    const auto d = get_or<std::string>(j, "distance", "W", where);
    if (d != "W" && d != "S") throw InvalidConfig("BaryScore distance must be W or S, got '" + d + "'");
    b.distance = d == "W" ? BaryDistance::kWasserstein : BaryDistance::kSinkhorn;
    b.epsilon = get_or<double>(j, "epsilon", b.epsilon, where);
    b.n_layers_used = get_or<std::size_t>(j, "layers", b.n_layers_used, where);
    b.max_iter = get_or<std::size_t>(j, "max_iter", b.max_iter, where);
    b.tol = get_or<double>(j, "tol", b.tol, where);
    m.config.kind = b;
  } else {
    throw GridError(where + ": type must be mover, bertscore or bary");
  }
  m.config.idf_scope = j.contains("idf_scope")
                           ? parse_idf_scope(get_or<std::string>(j, "idf_scope", "", where))
                           : default_idf_scope(m.config);
  if (j.contains("layer_agg")) {
    m.layer_agg = parse_layer_aggregation(get_or<std::string>(j, "layer_agg", "", where));
  }
  check_metric_config(m.config);
  m.label = get_or<std::string>(j, "label", metric_label(m.config), where);
  return m;
}

std::string subword_label(SubwordStrategy s, bool pr) {
  return std::string(to_string(s)) + (pr ? "+PR" : "");
}

}  // namespace

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

IdfMode resolve_idf(const IdfSetting& setting, std::uint64_t grid_seed) {
  if (const auto* s = std::get_if<IdfSampledCorpus>(&setting.mode)) {
    IdfSampledCorpus out = *s;
    out.seed = grid_seed + setting.seed_offset.value_or(fnv1a64(setting.label));
    return out;
  }
  return setting.mode;
}

const char* to_string(Factor f) {
  switch (f) {
    case Factor::kStopwords:
      return "stopwords";
    case Factor::kIdf:
      return "idf";
    case Factor::kSubword:
      return "subword";
  }
  return "?";
}

void check_grid(const SweepGrid& grid) {
  auto unique = [](const auto& list, const char* what) {
    if (list.empty()) throw GridError(std::string("grid list '") + what + "' is empty");
    std::set<std::string> seen;
    for (const auto& item : list) {
      if (item.label.empty()) throw GridError(std::string("empty label in '") + what + "'");
      if (!seen.insert(item.label).second) {
        throw GridError(std::string("duplicate label '") + item.label + "' in '" + what + "'");
      }
    }
  };
  unique(grid.metrics, "metrics");
  unique(grid.stopwords, "stopwords");
  unique(grid.idf, "idf");
  unique(grid.subword_punct, "subword_punct");
  for (const auto& m : grid.metrics) check_metric_config(m.config);
}

SweepGrid parse_grid(const std::string& json_text, const std::filesystem::path& base_dir) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw GridError(std::string("grid is not valid JSON: ") + e.what());
  }
  expect_keys(doc,
              {"description", "seed", "metrics", "stopwords", "idf", "subword_punct", "levels", "multi_ref",
               "tie_rule", "judgments"},
              "grid");
  SweepGrid g;
  g.base_dir = base_dir;
  g.seed = get_or<std::uint64_t>(doc, "seed", 0, "grid");
  g.multi_ref = parse_multi_ref(get_or<std::string>(doc, "multi_ref", "mean", "grid"));
  const auto tie = get_or<std::string>(doc, "tie_rule", "ties-discordant", "grid");
  if (tie == "ties-discordant") {
    g.tie_rule = TieRule::kTiesDiscordant;
  } else if (tie == "ties-excluded") {
    g.tie_rule = TieRule::kTiesExcluded;
  } else {
    throw GridError("tie_rule must be ties-discordant or ties-excluded, got '" + tie + "'");
  }

  if (doc.contains("judgments")) {
    const auto& j = doc.at("judgments");
    expect_keys(j, {"kind", "columns", "criterion", "lang_pair"}, "judgments");
    g.judgments = JudgmentSchema::defaults(parse_judgment_kind(get_or<std::string>(j, "kind", "da", "judgments")));
    g.judgments.lang_pair = get_or<std::string>(j, "lang_pair", "", "judgments");
    if (j.contains("criterion")) g.judgments.criterion = get_or<std::string>(j, "criterion", "", "judgments");
    if (j.contains("columns")) {
      const auto& c = j.at("columns");
      expect_keys(c, {"segment", "system", "score", "better", "worse", "criterion"}, "judgments.columns");
      auto& s = g.judgments;
      s.segment_column = get_or<std::string>(c, "segment", s.segment_column, "judgments.columns");
      s.system_column = get_or<std::string>(c, "system", s.system_column, "judgments.columns");
      s.score_column = get_or<std::string>(c, "score", s.score_column, "judgments.columns");
      s.better_column = get_or<std::string>(c, "better", s.better_column, "judgments.columns");
      s.worse_column = get_or<std::string>(c, "worse", s.worse_column, "judgments.columns");
      s.criterion_column = get_or<std::string>(c, "criterion", s.criterion_column, "judgments.columns");
    }
  }

  if (doc.contains("levels")) {
    for (const auto& l : array_at(doc, "levels")) {
      if (!l.is_string()) throw GridError("levels must be strings");
      g.levels.push_back(parse_level(l.get<std::string>()));
    }
  }

  const auto& metrics = array_at(doc, "metrics");
  for (std::size_t i = 0; i < metrics.size(); ++i) g.metrics.push_back(parse_metric(metrics[i], i));

  const auto& sw = array_at(doc, "stopwords");
  for (std::size_t i = 0; i < sw.size(); ++i) {
    const std::string where = "stopwords[" + std::to_string(i) + "]";
    expect_keys(sw[i], {"label", "path"}, where);
    StopwordSetting s;
    if (sw[i].contains("path") && !sw[i].at("path").is_null()) s.path = get_or<std::string>(sw[i], "path", "", where);
    s.label = get_or<std::string>(sw[i], "label", s.path ? std::filesystem::path(*s.path).stem().string() : "none",
                                  where);
    g.stopwords.push_back(std::move(s));
  }

  const auto& idf = array_at(doc, "idf");
  for (std::size_t i = 0; i < idf.size(); ++i) {
    const std::string where = "idf[" + std::to_string(i) + "]";
    const auto& j = idf[i];
    expect_keys(j, {"label", "mode", "k", "seed_offset", "path"}, where);
    const auto mode = get_or<std::string>(j, "mode", "", where);
    IdfSetting s;
    if (mode == "original") {
      s.mode = IdfOriginal{};
    } else if (mode == "disabled") {
      s.mode = IdfDisabled{};
    } else if (mode == "sampled") {
      IdfSampledCorpus sc;
      sc.k = get_or<std::size_t>(j, "k", sc.k, where);
      s.mode = sc;
      if (j.contains("seed_offset")) s.seed_offset = get_or<std::uint64_t>(j, "seed_offset", 0, where);
    } else if (mode == "external") {
      if (!j.contains("path")) throw GridError(where + ": external IDF needs 'path'");
      s.mode = IdfExternalCorpus{get_or<std::string>(j, "path", "", where)};
    } else {
      throw GridError(where + ": mode must be original, disabled, sampled or external");
    }
    if (!std::holds_alternative<IdfSampledCorpus>(s.mode) && j.contains("k")) {
      throw GridError(where + ": 'k' only applies to sampled IDF");
    }
    s.label = get_or<std::string>(j, "label", mode, where);
    g.idf.push_back(std::move(s));
  }

  const auto& sub = array_at(doc, "subword_punct");
  for (std::size_t i = 0; i < sub.size(); ++i) {
    const std::string where = "subword_punct[" + std::to_string(i) + "]";
    expect_keys(sub[i], {"label", "subword", "remove_punct"}, where);
    SubwordSetting s;
    s.subword = parse_subword_strategy(get_or<std::string>(sub[i], "subword", "first", where));
    s.remove_punct = get_or<bool>(sub[i], "remove_punct", false, where);
    s.label = get_or<std::string>(sub[i], "label", subword_label(s.subword, s.remove_punct), where);
    g.subword_punct.push_back(std::move(s));
  }

  check_grid(g);
  return g;
}

SweepGrid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grid file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_grid(ss.str(), path.parent_path());
}

std::vector<Level> effective_levels(const SweepGrid& grid) {
  if (!grid.levels.empty()) return grid.levels;
  switch (grid.judgments.kind) {
    case JudgmentKind::kDirectAssessment:
      return {Level::kSegment, Level::kSystem};
    case JudgmentKind::kRelativeRanking:
      return {Level::kSegment};
    case JudgmentKind::kSummaryCriterion:
      return {Level::kSummary, Level::kSystem};
  }
  return {Level::kSegment};
}

// ---------------------------------------------------------------------------
// Cell planning

bool factor_applies(const SweepGrid& grid, std::size_t metric, Factor factor) {
  return factor != Factor::kIdf || uses_idf(grid.metrics.at(metric).config);
}

std::optional<std::size_t> default_setting(const SweepGrid& grid, std::size_t metric, Factor factor) {
  switch (factor) {
    case Factor::kStopwords:
      for (std::size_t i = 0; i < grid.stopwords.size(); ++i) {
        if (!grid.stopwords[i].path) return i;
      }
      return std::nullopt;
    case Factor::kIdf:
      for (std::size_t i = 0; i < grid.idf.size(); ++i) {
        if (std::holds_alternative<IdfOriginal>(grid.idf[i].mode)) return i;
      }
      return std::nullopt;
    case Factor::kSubword: {
      const auto prep = default_preprocess(grid.metrics.at(metric).config);
      for (std::size_t i = 0; i < grid.subword_punct.size(); ++i) {
        const auto& s = grid.subword_punct[i];
        if (s.subword == prep.subword && s.remove_punct == prep.remove_punct) return i;
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

namespace {

std::string cell_key(const SweepGrid& grid, const CellSpec& c) {
  const auto& m = grid.metrics[c.metric];
  std::string key = m.label;
  key += "|sw=";
  key += c.stopword && grid.stopwords[*c.stopword].path ? *grid.stopwords[*c.stopword].path : "none";
  key += "|idf=";
  if (!uses_idf(m.config)) {
    key += "n/a";
  } else if (c.idf) {
    const auto mode = resolve_idf(grid.idf[*c.idf], grid.seed);
    if (const auto* e = std::get_if<IdfExternalCorpus>(&mode)) {
      key += "external(" + e->path.generic_string() + ")";
    } else {
      key += describe(mode);
    }
  } else {
    key += "original";
  }
  const auto prep = default_preprocess(m.config);
  const auto sub = c.subword ? grid.subword_punct[*c.subword].subword : prep.subword;
  const bool pr = c.subword ? grid.subword_punct[*c.subword].remove_punct : prep.remove_punct;
  key += "|sub=" + subword_label(sub, pr);
  return key;
}

}  // namespace

CellPlan plan_cells(const SweepGrid& grid) {
  CellPlan plan;
  std::map<std::string, std::size_t> by_key;
  auto add = [&](CellSpec spec, Factor f, std::size_t setting) {
    spec.key = cell_key(grid, spec);
    auto [it, fresh] = by_key.emplace(spec.key, plan.cells.size());
    if (fresh) plan.cells.push_back(spec);
    plan.lookup[{spec.metric, f, setting}] = it->second;
  };
  for (std::size_t m = 0; m < grid.metrics.size(); ++m) {
    const bool idf = uses_idf(grid.metrics[m].config);
    const auto d_sw = default_setting(grid, m, Factor::kStopwords);
    const auto d_idf = idf ? default_setting(grid, m, Factor::kIdf) : std::nullopt;
    const auto d_sub = default_setting(grid, m, Factor::kSubword);
    for (std::size_t i = 0; i < grid.stopwords.size(); ++i) add({m, i, d_idf, d_sub, {}}, Factor::kStopwords, i);
    if (idf) {
      for (std::size_t i = 0; i < grid.idf.size(); ++i) add({m, d_sw, i, d_sub, {}}, Factor::kIdf, i);
    }
    for (std::size_t i = 0; i < grid.subword_punct.size(); ++i) add({m, d_sw, d_idf, i, {}}, Factor::kSubword, i);
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Running

namespace {

std::filesystem::path resolve_path(const SweepGrid& grid, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !grid.base_dir.empty()) path = grid.base_dir / path;
  return path;
}

CellResult run_cell(const SweepGrid& grid, const CellSpec& spec, const EmbeddingCorpus& corpus,
                    const JudgmentDataset& judgments, const std::vector<std::set<std::string>>& lists,
                    const std::vector<Level>& levels) {
  CellResult out;
  try {
    const auto& metric = grid.metrics[spec.metric];
    ScoreRequest req;
    req.metric = metric.config;
    req.prep = default_preprocess(metric.config);
    if (metric.layer_agg) req.prep.layer_agg = *metric.layer_agg;
    if (spec.stopword && grid.stopwords[*spec.stopword].path) {
      req.prep.stopwords = lists[*spec.stopword];
      req.prep.stopword_list_id = grid.stopwords[*spec.stopword].label;
    }
    if (spec.subword) {
      req.prep.subword = grid.subword_punct[*spec.subword].subword;
      req.prep.remove_punct = grid.subword_punct[*spec.subword].remove_punct;
    }
    req.idf = IdfOriginal{};
    if (spec.idf && uses_idf(metric.config)) {
      req.idf = resolve_idf(grid.idf[*spec.idf], grid.seed);
      if (auto* e = std::get_if<IdfExternalCorpus>(&req.idf)) e->path = resolve_path(grid, e->path.string());
    }
    req.multi_ref = grid.multi_ref;

    const auto run = score_dataset(corpus, &judgments, req);
    out.n_scored = run.scores.size();
    out.n_skipped = run.skips.size();
    out.skip_reasons = run.skip_reasons();
    const std::size_t total = out.n_scored + out.n_skipped;
    out.flagged = total > 0 && static_cast<double>(out.n_skipped) > 0.05 * static_cast<double>(total);
    for (auto level : levels) {
      try {
        out.correlations.emplace(level, correlate(run, judgments, level, grid.tie_rule));
      } catch (const Error& e) {
        out.level_errors.emplace(level, e.code() + ": " + e.what());
      }
    }
  } catch (const Error& e) {
    out.error = e.code() + ": " + e.what();
  } catch (const std::exception& e) {
    out.error = std::string("InternalError: ") + e.what();
  }
  return out;
}

}  // namespace

double cell_value(const CellResult& cell, Level level, std::string* why) {
  if (cell.error) {
    if (why) *why = "cell failed";
    return std::nan("");
  }
  const auto it = cell.correlations.find(level);
  if (it == cell.correlations.end()) {
    if (why) {
      const auto e = cell.level_errors.find(level);
      *why = e == cell.level_errors.end() ? "not computed" : e->second;
    }
    return std::nan("");
  }
  return it->second.primary;
}

SensitivityReport run_sweep(const SweepGrid& grid, const EmbeddingCorpus& corpus,
                            const JudgmentDataset& judgments, std::size_t threads) {
  check_grid(grid);
  const auto levels = effective_levels(grid);
  auto plan = plan_cells(grid);

  std::vector<std::set<std::string>> lists(grid.stopwords.size());
  for (std::size_t i = 0; i < grid.stopwords.size(); ++i) {
    if (grid.stopwords[i].path) lists[i] = load_stopword_list(resolve_path(grid, *grid.stopwords[i].path));
  }

  std::vector<CellResult> cells(plan.cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < plan.cells.size(); i = next.fetch_add(1)) {
      cells[i] = run_cell(grid, plan.cells[i], corpus, judgments, lists, levels);
      log_debug("cell " + plan.cells[i].key + (cells[i].error ? " failed: " + *cells[i].error : " done"));
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(threads, plan.cells.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return assemble_report(grid, std::move(plan), std::move(cells), levels);
}

// ---------------------------------------------------------------------------
// Report assembly

namespace {

const std::string& setting_label(const SweepGrid& g, Factor f, std::size_t i) {
  switch (f) {
    case Factor::kStopwords:
      return g.stopwords[i].label;
    case Factor::kIdf:
      return g.idf[i].label;
    case Factor::kSubword:
      return g.subword_punct[i].label;
  }
  throw std::logic_error("bad factor");
}

std::size_t setting_count(const SweepGrid& g, Factor f) {
  switch (f) {
    case Factor::kStopwords:
      return g.stopwords.size();
    case Factor::kIdf:
      return g.idf.size();
    case Factor::kSubword:
      return g.subword_punct.size();
  }
  return 0;
}

GroupStat make_group(Factor f, std::string name, const std::vector<SettingValue>& values,
                     const std::vector<std::size_t>& members) {
  GroupStat g;
  g.factor = f;
  g.group = std::move(name);
  for (auto i : members) {
    if (!values[i].value) continue;
    g.settings.push_back(values[i].setting);
    g.values.push_back(*values[i].value);
  }
  try {
    g.range = range_of(g.values);
    g.cv = cv(g.values);
  } catch (const Error& e) {
    g.absent_reason = e.code();
  }
  return g;
}

Comparison make_comparison(Factor f, std::string name, std::string group, std::optional<double> a,
                           std::optional<double> b) {
  Comparison c;
  c.factor = f;
  c.name = std::move(name);
  c.group = std::move(group);
  c.a = a;
  c.b = b;
  if (!a || !b) {
    c.absent_reason = "missing endpoint";
    return c;
  }
  c.ad = ad(*a, *b);
  try {
    c.rd = rd(*a, *b);
  } catch (const Error& e) {
    c.absent_reason = e.code();
  }
  return c;
}

}  // namespace

SensitivityReport assemble_report(const SweepGrid& grid, CellPlan plan, std::vector<CellResult> cells,
                                  const std::vector<Level>& levels) {
  SensitivityReport rep;
  rep.grid = grid;
  rep.plan = std::move(plan);
  rep.cells = std::move(cells);

  for (const auto& c : rep.cells) {
    if (c.error) ++rep.failed_cells;
    rep.skipped_pairs += c.n_skipped;
    for (const auto& [reason, n] : c.skip_reasons) rep.skip_reasons[reason] += n;
  }
  const Factor factors[] = {Factor::kStopwords, Factor::kIdf, Factor::kSubword};
  for (auto f : factors) {
    auto& t = rep.tally[f];
    for (std::size_t i = 0; i < setting_count(grid, f); ++i) t.emplace_back(setting_label(grid, f, i), 0);
    rep.tally_cases[f] = 0;
  }

  for (std::size_t m = 0; m < grid.metrics.size(); ++m) {
    for (auto level : levels) {
      TestCase tc;
      tc.metric = m;
      tc.level = level;
      for (auto f : factors) {
        if (!factor_applies(grid, m, f)) continue;
        auto& vals = tc.values[f];
        for (std::size_t i = 0; i < setting_count(grid, f); ++i) {
          SettingValue sv;
          sv.setting = setting_label(grid, f, i);
          const auto& cell = rep.cells.at(rep.plan.lookup.at({m, f, i}));
          std::string why;
          const double v = cell_value(cell, level, &why);
          if (std::isnan(v)) {
            sv.absent_reason = why;
          } else {
            sv.value = v;
          }
          vals.push_back(std::move(sv));
        }

        // Best setting, ties toward the default.
        std::optional<std::size_t> best;
        const auto dflt = default_setting(grid, m, f);
        for (std::size_t i = 0; i < vals.size(); ++i) {
          if (!vals[i].value) continue;
          if (!best || *vals[i].value > *vals[*best].value ||
              (*vals[i].value == *vals[*best].value && dflt && i == *dflt)) {
            best = i;
          }
        }
        if (best) {
          tc.best[f] = vals[*best].setting;
          ++rep.tally[f][*best].second;
          ++rep.tally_cases[f];
        }
      }

      if (tc.values.count(Factor::kStopwords)) {
        std::vector<std::size_t> all(grid.stopwords.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        tc.groups.push_back(make_group(Factor::kStopwords, "all", tc.values[Factor::kStopwords], all));
      }
      if (tc.values.count(Factor::kIdf)) {
        const auto& vals = tc.values[Factor::kIdf];
        std::vector<std::size_t> ori_rand, rand;
        std::optional<std::size_t> ori, dis;
        for (std::size_t i = 0; i < grid.idf.size(); ++i) {
          const auto& mode = grid.idf[i].mode;
          if (std::holds_alternative<IdfOriginal>(mode)) {
            ori_rand.push_back(i);
            if (!ori) ori = i;
          } else if (std::holds_alternative<IdfSampledCorpus>(mode)) {
            ori_rand.push_back(i);
            rand.push_back(i);
          } else if (std::holds_alternative<IdfDisabled>(mode) && !dis) {
            dis = i;
          }
        }
        if (!ori_rand.empty()) tc.groups.push_back(make_group(Factor::kIdf, "ori+rand", vals, ori_rand));
        std::optional<double> rand_mean;
        std::vector<double> rv;
        for (auto i : rand) {
          if (vals[i].value) rv.push_back(*vals[i].value);
        }
        if (!rv.empty()) rand_mean = mean(rv);
        auto at = [&](std::optional<std::size_t> i) { return i ? vals[*i].value : std::nullopt; };
        if (dis && ori) tc.comparisons.push_back(make_comparison(Factor::kIdf, "dis,ori", "", at(dis), at(ori)));
        if (!rand.empty() && dis) {
          tc.comparisons.push_back(make_comparison(Factor::kIdf, "rand,dis", "", rand_mean, at(dis)));
        }
        if (!rand.empty() && ori) {
          tc.comparisons.push_back(make_comparison(Factor::kIdf, "rand,ori", "", rand_mean, at(ori)));
        }
      }
      if (tc.values.count(Factor::kSubword)) {
        const auto& vals = tc.values[Factor::kSubword];
        std::vector<std::size_t> with_pr, without_pr;
        for (std::size_t i = 0; i < grid.subword_punct.size(); ++i) {
          (grid.subword_punct[i].remove_punct ? with_pr : without_pr).push_back(i);
        }
        if (!with_pr.empty()) tc.groups.push_back(make_group(Factor::kSubword, "+PR", vals, with_pr));
        if (!without_pr.empty()) tc.groups.push_back(make_group(Factor::kSubword, "-PR", vals, without_pr));
        for (auto s : {SubwordStrategy::kFirstPiece, SubwordStrategy::kAllPieces, SubwordStrategy::kAverageAll}) {
          std::optional<std::size_t> on, off;
          for (std::size_t i = 0; i < grid.subword_punct.size(); ++i) {
            const auto& st = grid.subword_punct[i];
            if (st.subword != s) continue;
            if (st.remove_punct && !on) on = i;
            if (!st.remove_punct && !off) off = i;
          }
          if (on && off) {
            tc.comparisons.push_back(
                make_comparison(Factor::kSubword, "dis,pr", to_string(s), vals[*off].value, vals[*on].value));
          }
        }
      }
      rep.cases.push_back(std::move(tc));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

ojson metric_json(const MetricSetting& m) {
  ojson j;
  j["label"] = m.label;
  if (const auto* mv = std::get_if<MoverConfig>(&m.config.kind)) {
    j["type"] = "mover";
    j["n"] = mv->n;
  } else if (const auto* b = std::get_if<BertScoreConfig>(&m.config.kind)) {
    j["type"] = "bertscore";
    j["variant"] = variant_name(b->variant);
    j["idf_on_hypothesis"] = b->idf_on_hypothesis;
  } else {
    const auto& bary = std::get<BaryConfig>(m.config.kind);
    j["type"] = "bary";
    j["distance"] = bary.distance == BaryDistance::kWasserstein ? "W" : "S";
    j["epsilon"] = bary.epsilon;
    j["layers"] = bary.n_layers_used;
    j["max_iter"] = bary.max_iter;
    j["tol"] = bary.tol;
  }
  j["uses_idf"] = uses_idf(m.config);
  j["idf_scope"] = to_string(m.config.idf_scope);
  auto prep = default_preprocess(m.config);
  if (m.layer_agg) prep.layer_agg = *m.layer_agg;
  j["defaults"] = {{"stopwords", "none"},
                   {"idf", "original"},
                   {"subword", to_string(prep.subword)},
                   {"remove_punct", prep.remove_punct},
                   {"layer_agg", describe(prep.layer_agg)}};
  return j;
}

ojson grid_ojson(const SweepGrid& g) {
  ojson j;
  j["seed"] = g.seed;
  ojson levels = ojson::array();
  for (auto l : effective_levels(g)) levels.push_back(to_string(l));
  j["levels"] = levels;
  j["multi_ref"] = to_string(g.multi_ref);
  j["tie_rule"] = to_string(g.tie_rule);
  j["filter_order"] = "subword,punctuation,stopwords";
  const auto& s = g.judgments;
  ojson judg;
  judg["kind"] = to_string(s.kind);
  judg["lang_pair"] = s.lang_pair;
  judg["criterion"] = s.criterion ? ojson(*s.criterion) : ojson(nullptr);
  ojson cols;
  if (s.kind == JudgmentKind::kRelativeRanking) {
    cols["segment"] = s.segment_column;
    cols["better"] = s.better_column;
    cols["worse"] = s.worse_column;
  } else {
    cols["segment"] = s.segment_column;
    cols["system"] = s.system_column;
    cols["score"] = s.score_column;
    if (s.kind == JudgmentKind::kSummaryCriterion) cols["criterion"] = s.criterion_column;
  }
  judg["columns"] = cols;
  j["judgments"] = judg;

  ojson metrics = ojson::array();
  for (const auto& m : g.metrics) metrics.push_back(metric_json(m));
  j["metrics"] = metrics;

  ojson sw = ojson::array();
  for (const auto& st : g.stopwords) {
    sw.push_back({{"label", st.label}, {"path", st.path ? ojson(*st.path) : ojson(nullptr)}});
  }
  j["stopwords"] = sw;

  ojson idf = ojson::array();
  for (const auto& st : g.idf) {
    ojson e;
    e["label"] = st.label;
    const auto mode = resolve_idf(st, g.seed);
    if (std::holds_alternative<IdfOriginal>(mode)) {
      e["mode"] = "original";
    } else if (std::holds_alternative<IdfDisabled>(mode)) {
      e["mode"] = "disabled";
    } else if (const auto* sc = std::get_if<IdfSampledCorpus>(&mode)) {
      e["mode"] = "sampled";
      e["k"] = sc->k;
      e["seed_offset"] = st.seed_offset.value_or(fnv1a64(st.label));
      e["seed"] = sc->seed;
    } else {
      e["mode"] = "external";
      e["path"] = std::get<IdfExternalCorpus>(mode).path.generic_string();
    }
    idf.push_back(e);
  }
  j["idf"] = idf;

  ojson sub = ojson::array();
  for (const auto& st : g.subword_punct) {
    sub.push_back({{"label", st.label}, {"subword", to_string(st.subword)}, {"remove_punct", st.remove_punct}});
  }
  j["subword_punct"] = sub;
  return j;
}

ojson opt(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string cell_setting(const SweepGrid& g, const std::optional<std::size_t>& i, Factor f) {
  return i ? setting_label(g, f, *i) : std::string("(default)");
}

ojson report_ojson(const SensitivityReport& r) {
  const auto& g = r.grid;
  ojson j;
  j["tool"] = {{"name", kToolName}, {"version", kToolVersion}};
  j["config"] = grid_ojson(g);
  ojson inputs = ojson::object();
  for (const auto& [k, v] : r.inputs) inputs[k] = v;
  j["inputs"] = inputs;

  ojson cells = ojson::array();
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const auto& spec = r.plan.cells[i];
    const auto& c = r.cells[i];
    ojson e;
    e["id"] = spec.key;
    e["metric"] = g.metrics[spec.metric].label;
    e["stopwords"] = cell_setting(g, spec.stopword, Factor::kStopwords);
    e["idf"] = uses_idf(g.metrics[spec.metric].config) ? cell_setting(g, spec.idf, Factor::kIdf) : "n/a";
    e["subword"] = cell_setting(g, spec.subword, Factor::kSubword);
    e["status"] = c.error ? "failed" : "ok";
    if (c.error) e["error"] = *c.error;
    e["pairs_scored"] = c.n_scored;
    e["pairs_skipped"] = c.n_skipped;
    ojson reasons = ojson::object();
    for (const auto& [k, n] : c.skip_reasons) reasons[k] = n;
    e["skip_reasons"] = reasons;
    e["flagged"] = c.flagged;
    ojson corr = ojson::object();
    for (const auto& [level, cr] : c.correlations) {
      ojson v;
      v["primary_stat"] = cr.primary_stat;
      v["value"] = cr.primary;
      ojson all = ojson::object();
      for (const auto& [k, x] : cr.values) all[k] = x;
      v["statistics"] = all;
      v["n_items"] = cr.n_items;
      v["n_excluded"] = cr.n_excluded;
      corr[to_string(level)] = v;
    }
    for (const auto& [level, err] : c.level_errors) corr[to_string(level)] = {{"error", err}};
    e["correlations"] = corr;
    cells.push_back(e);
  }
  j["cells"] = cells;

  ojson cases = ojson::array();
  for (const auto& tc : r.cases) {
    ojson e;
    e["metric"] = g.metrics[tc.metric].label;
    e["level"] = to_string(tc.level);
    ojson per = ojson::object();
    for (const auto& [f, vals] : tc.values) {
      ojson arr = ojson::array();
      for (const auto& sv : vals) {
        ojson x;
        x["setting"] = sv.setting;
        x["value"] = opt(sv.value);
        if (!sv.value) x["absent_reason"] = sv.absent_reason;
        arr.push_back(x);
      }
      per[to_string(f)] = arr;
    }
    e["per_setting"] = per;
    ojson groups = ojson::array();
    for (const auto& gs : tc.groups) {
      ojson x;
      x["factor"] = to_string(gs.factor);
      x["group"] = gs.group;
      x["settings"] = gs.settings;
      x["values"] = gs.values;
      x["cv_percent"] = opt(gs.cv);
      x["range"] = opt(gs.range);
      if (!gs.cv) x["absent_reason"] = gs.absent_reason;
      groups.push_back(x);
    }
    e["groups"] = groups;
    ojson comps = ojson::array();
    for (const auto& c : tc.comparisons) {
      ojson x;
      x["factor"] = to_string(c.factor);
      x["comparison"] = c.name;
      x["group"] = c.group;
      x["a"] = opt(c.a);
      x["b"] = opt(c.b);
      x["ad"] = opt(c.ad);
      x["rd_percent"] = opt(c.rd);
      x["rd_percent_display"] = c.rd ? ojson(fixed2(*c.rd)) : ojson(nullptr);
      if (!c.rd) x["absent_reason"] = c.absent_reason;
      comps.push_back(x);
    }
    e["comparisons"] = comps;
    ojson best = ojson::object();
    for (const auto& [f, label] : tc.best) best[to_string(f)] = label;
    e["best"] = best;
    cases.push_back(e);
  }
  j["test_cases"] = cases;

  ojson tally = ojson::object();
  for (const auto& [f, wins] : r.tally) {
    ojson w = ojson::object();
    for (const auto& [label, n] : wins) w[label] = n;
    tally[to_string(f)] = {{"test_cases", r.tally_cases.at(f)}, {"wins", w}};
  }
  j["best_setting_tally"] = tally;

  ojson reasons = ojson::object();
  for (const auto& [k, n] : r.skip_reasons) reasons[k] = n;
  std::size_t flagged = 0;
  for (const auto& c : r.cells) flagged += c.flagged ? 1 : 0;
  j["skipped_pairs"] = {{"total", r.skipped_pairs}, {"reasons", reasons}, {"flagged_cells", flagged}};
  j["failed_cells"] = r.failed_cells;
  return j;
}

std::string csv_preamble(const SensitivityReport& r) {
  ojson inputs = ojson::object();
  for (const auto& [k, v] : r.inputs) inputs[k] = v;
  return std::string("# ") + kToolName + " " + kToolVersion + "\n# config " + grid_ojson(r.grid).dump() +
         "\n# inputs " + inputs.dump() + "\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

std::string grid_json(const SweepGrid& grid) { return grid_ojson(grid).dump(2); }

std::string report_json(const SensitivityReport& report) { return report_ojson(report).dump(2) + "\n"; }

void write_report_files(const SensitivityReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  const auto& g = r.grid;
  const std::string pre = csv_preamble(r);

  write_text(dir / "report.json", report_json(r));

  std::ostringstream corr;
  corr << pre << "metric,level,factor,setting,cell,statistic,value,n_items,n_excluded,pairs_skipped,flagged\n";
  for (const auto& tc : r.cases) {
    for (const auto& [f, vals] : tc.values) {
      for (std::size_t i = 0; i < vals.size(); ++i) {
        const auto ci = r.plan.lookup.at({tc.metric, f, i});
        const auto& cell = r.cells[ci];
        const auto it = cell.correlations.find(tc.level);
        corr << csv_field(g.metrics[tc.metric].label) << ',' << to_string(tc.level) << ',' << to_string(f) << ','
             << csv_field(vals[i].setting) << ',' << csv_field(r.plan.cells[ci].key) << ','
             << (it != cell.correlations.end() ? it->second.primary_stat : "") << ',' << num(vals[i].value) << ','
             << (it != cell.correlations.end() ? std::to_string(it->second.n_items) : "") << ','
             << (it != cell.correlations.end() ? std::to_string(it->second.n_excluded) : "") << ','
             << cell.n_skipped << ',' << (cell.flagged ? "true" : "false") << '\n';
      }
    }
  }
  write_text(dir / "correlations.csv", corr.str());

  const std::pair<Factor, const char*> cv_files[] = {
      {Factor::kStopwords, "cv_stop.csv"}, {Factor::kIdf, "cv_idf.csv"}, {Factor::kSubword, "cv_sub.csv"}};
  for (const auto& [f, name] : cv_files) {
    std::ostringstream out;
    out << pre << "metric,level,group,n_settings,cv_percent,range,status\n";
    for (const auto& tc : r.cases) {
      for (const auto& gs : tc.groups) {
        if (gs.factor != f) continue;
        out << csv_field(g.metrics[tc.metric].label) << ',' << to_string(tc.level) << ',' << csv_field(gs.group)
            << ',' << gs.values.size() << ',' << num(gs.cv) << ',' << num(gs.range) << ','
            << (gs.cv ? "ok" : gs.absent_reason) << '\n';
      }
    }
    write_text(dir / name, out.str());
  }

  std::ostringstream rdf;
  rdf << pre << "metric,level,factor,comparison,group,a,b,ad,rd_percent,status\n";
  for (const auto& tc : r.cases) {
    for (const auto& c : tc.comparisons) {
      rdf << csv_field(g.metrics[tc.metric].label) << ',' << to_string(tc.level) << ',' << to_string(c.factor)
          << ',' << csv_field(c.name) << ',' << csv_field(c.group) << ',' << num(c.a) << ',' << num(c.b) << ','
          << num(c.ad) << ',' << (c.rd ? fixed2(*c.rd) : "") << ',' << (c.rd ? "ok" : c.absent_reason) << '\n';
    }
  }
  write_text(dir / "rd.csv", rdf.str());

  std::ostringstream tally;
  tally << pre << "factor,setting,wins,test_cases\n";
  for (const auto& [f, wins] : r.tally) {
    for (const auto& [label, n] : wins) {
      tally << to_string(f) << ',' << csv_field(label) << ',' << n << ',' << r.tally_cases.at(f) << '\n';
    }
  }
  write_text(dir / "tally.csv", tally.str());
}

}  // namespace otmetrics

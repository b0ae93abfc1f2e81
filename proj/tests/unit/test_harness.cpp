#include <doctest.h>

#include <cmath>

#include "corpus.hpp"
#include "fixtures.hpp"
#include "otmetrics/harness.hpp"

using namespace otmetrics;
using fixtures::TempDir;

namespace {

EmbeddingCorpus toy_corpus(const fixtures::ToyCorpus& toy) {
  EmbeddingCorpus c;
  for (const auto& s : toy.segments) c.add(s, toy.header);
  return c;
}

JudgmentDataset toy_judgments(const fixtures::ToyCorpus& toy) {
  JudgmentDataset d;
  for (const auto& [seg, sys, score] : toy.da) d.scored.push_back({seg, sys, score});
  return d;
}

ScoreRequest mover_request() {
  ScoreRequest r;
  r.metric = MetricConfig{MoverConfig{1}};
  r.prep = default_preprocess(r.metric);
  return r;
}

ScoreRequest bert_request() {
  ScoreRequest r;
  r.metric = MetricConfig{BertScoreConfig{}, IdfScope::kRefOnly};
  r.prep = default_preprocess(r.metric);
  return r;
}

}  // namespace

TEST_CASE("judgment loader binds the score column by name") {
  const auto d = load_judgments(fixtures::data_dir() / "synthetic" / "da.csv",
                                JudgmentSchema::defaults(JudgmentKind::kDirectAssessment));
  CHECK(d.scored.size() == 90);
  CHECK(d.scored[0].segment_id == "seg01");
  REQUIRE_FALSE(d.notices.empty());
  CHECK(d.notices[0].find("model_loglik") != std::string::npos);
  // The score column is not the model log-likelihood, which is always negative.
  for (const auto& j : d.scored) CHECK(j.score >= 0.0);
}

TEST_CASE("relative ranking loader keeps every pair") {
  const auto path = fixtures::data_dir() / "synthetic" / "darr.csv";
  const auto d = load_judgments(path, JudgmentSchema::defaults(JudgmentKind::kRelativeRanking));
  std::size_t lines = 0;
  std::istringstream in(fixtures::read_text(path));
  for (std::string line; std::getline(in, line);) lines += !line.empty();
  CHECK(d.size() == lines - 1);
  CHECK(d.ranked.size() == 84);
}

TEST_CASE("judgment loader errors") {
  TempDir dir;
  const auto schema = JudgmentSchema::defaults(JudgmentKind::kDirectAssessment);
  fixtures::write_text(dir / "a.csv", "segment_id,system_id,rating\ns1,a,1\n");
  try {
    load_judgments(dir / "a.csv", schema);
    FAIL("expected MissingColumn");
  } catch (const MissingColumn& e) {
    CHECK(std::string(e.what()).find("'score'") != std::string::npos);
  }
  fixtures::write_text(dir / "b.csv", "segment_id,system_id,score\ns1,a,1\ns1,a,2\n");
  CHECK_THROWS_AS(load_judgments(dir / "b.csv", schema), DuplicateJudgment);
  fixtures::write_text(dir / "c.csv", "segment_id,system_id,score\ns1,a,high\n");
  CHECK_THROWS_AS(load_judgments(dir / "c.csv", schema), NonNumericScore);
  fixtures::write_text(dir / "d.csv", "segment_id,system_id,score\ns1,a,nan\n");
  CHECK_THROWS_AS(load_judgments(dir / "d.csv", schema), NonNumericScore);
  CHECK_THROWS_AS(load_judgments(dir / "missing.csv", schema), IoError);
}

TEST_CASE("tab-separated judgments with custom columns") {
  TempDir dir;
  fixtures::write_text(dir / "j.tsv", "sid\tsys\tz\ns1\ta\t-0.5\ns1\tb\t1.25\n");
  auto schema = JudgmentSchema::defaults(JudgmentKind::kDirectAssessment);
  schema.segment_column = "sid";
  schema.system_column = "sys";
  schema.score_column = "z";
  const auto d = load_judgments(dir / "j.tsv", schema);
  REQUIRE(d.scored.size() == 2);
  CHECK(d.scored[0].score == -0.5);
  CHECK(d.scored[1].system_id == "b");
}

TEST_CASE("summary judgments filter by criterion") {
  TempDir dir;
  fixtures::write_text(dir / "s.csv",
                       "summary_id,system_id,criterion,score\nd1,a,pyramid,0.5\nd1,a,responsiveness,3\nd2,a,pyramid,0.25\n");
  auto schema = JudgmentSchema::defaults(JudgmentKind::kSummaryCriterion);
  schema.criterion = "pyramid";
  const auto d = load_judgments(dir / "s.csv", schema);
  CHECK(d.scored.size() == 2);
  CHECK(d.criterion == "pyramid");
}

TEST_CASE("quoted fields") {
  CHECK(split_delimited(R"(a,"b,c",d)", ',') == std::vector<std::string>{"a", "b,c", "d"});
  CHECK(split_delimited(R"("say ""hi""",x)", ',') == std::vector<std::string>{"say \"hi\"", "x"});
}

TEST_CASE("hypothesis identical to reference scores one") {
  fixtures::ToyOptions opt;
  opt.systems = {};
  auto toy = fixtures::make_toy_corpus(opt);
  const auto refs = toy.segments;
  for (auto s : refs) {
    s.role = SegmentRole::kHypothesis;
    s.system_id = "copy";
    toy.segments.push_back(s);
  }
  const auto corpus = toy_corpus(toy);
  for (const auto& req : {mover_request(), bert_request()}) {
    const auto run = score_dataset(corpus, nullptr, req);
    CHECK(run.scores.size() + run.skips.size() == opt.n_segments);
    for (const auto& s : run.scores) CHECK(s.score == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("scoring is deterministic and ordered") {
  const auto toy = fixtures::make_toy_corpus({});
  const auto corpus = toy_corpus(toy);
  const auto j = toy_judgments(toy);
  const auto a = score_dataset(corpus, &j, mover_request());
  const auto b = score_dataset(corpus, &j, mover_request());
  REQUIRE(a.scores.size() == b.scores.size());
  for (std::size_t i = 0; i < a.scores.size(); ++i) {
    CHECK(a.scores[i].score == b.scores[i].score);
    CHECK(a.scores[i].segment_id == b.scores[i].segment_id);
    if (i > 0) {
      CHECK(std::make_pair(a.scores[i - 1].segment_id, a.scores[i - 1].system_id) <
            std::make_pair(a.scores[i].segment_id, a.scores[i].system_id));
    }
  }
}

TEST_CASE("a judged pair without embeddings fails before scoring") {
  const auto toy = fixtures::make_toy_corpus({});
  const auto corpus = toy_corpus(toy);
  auto j = toy_judgments(toy);
  j.scored.push_back({"seg00", "ghost", 50.0});
  try {
    score_dataset(corpus, &j, mover_request());
    FAIL("expected MissingEmbedding");
  } catch (const MissingEmbedding& e) {
    CHECK(std::string(e.what()).find("ghost") != std::string::npos);
  }
}

TEST_CASE("empty sides become skip records") {
  auto toy = fixtures::make_toy_corpus({});
  // A punctuation-only hypothesis is empty once punctuation is removed.
  const std::vector<std::vector<double>> layers(12, std::vector<double>(4, 0.5));
  toy.segments.push_back(fixtures::segment("extra", {fixtures::token("the", 0, layers)}));
  toy.segments.push_back(fixtures::segment("extra", {fixtures::token(".", 0, layers, true)}, "s1"));
  const auto corpus = toy_corpus(toy);
  const auto run = score_dataset(corpus, nullptr, mover_request());
  REQUIRE(run.skips.size() == 1);
  CHECK(run.skips[0].segment_id == "extra");
  CHECK(run.skips[0].reason == "EmptySide");
  CHECK(run.skip_reasons().at("EmptySide") == 1);
}

TEST_CASE("multiple references aggregate by mean or max") {
  auto toy = fixtures::make_toy_corpus({});
  // Second reference for seg00: a copy of system s1's hypothesis.
  for (const auto& s : toy.segments) {
    if (s.segment_id == "seg00" && s.system_id == std::optional<std::string>("s1")) {
      auto r = s;
      r.role = SegmentRole::kReference;
      r.system_id.reset();
      toy.segments.push_back(r);
      break;
    }
  }
  const auto corpus = toy_corpus(toy);
  REQUIRE(corpus.references_of("seg00").size() == 2);
  auto req = bert_request();
  req.multi_ref = MultiRefStrategy::kMax;
  const auto mx = score_dataset(corpus, nullptr, req);
  req.multi_ref = MultiRefStrategy::kMean;
  const auto mn = score_dataset(corpus, nullptr, req);
  for (std::size_t i = 0; i < mx.scores.size(); ++i) {
    if (mx.scores[i].segment_id != "seg00") continue;
    CHECK(mx.scores[i].score >= mn.scores[i].score);
    if (mx.scores[i].system_id == "s1") CHECK(mx.scores[i].score == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("idf tables follow the scope") {
  const auto toy = fixtures::make_toy_corpus({});
  const auto corpus = toy_corpus(toy);
  auto req = mover_request();
  auto [r, h] = build_idf_tables(corpus, req);
  CHECK(r.n_docs() == 20);
  CHECK(h.n_docs() == 60);
  req.metric.idf_scope = IdfScope::kRefOnly;
  auto [r2, h2] = build_idf_tables(corpus, req);
  CHECK(h2.n_docs() == 20);
  req.metric.idf_scope = IdfScope::kSingleCorpus;
  auto [r3, h3] = build_idf_tables(corpus, req);
  CHECK(r3.n_docs() == 80);
  req.idf = IdfDisabled{};
  CHECK(build_idf_tables(corpus, req).first.is_disabled());
  req.idf = IdfSampledCorpus{30, 5};
  auto [r4, h4] = build_idf_tables(corpus, req);
  CHECK(r4.n_docs() == 30);
  req.idf = IdfSampledCorpus{500, 5};
  CHECK_THROWS_AS(build_idf_tables(corpus, req), PoolTooSmall);
}

TEST_CASE("correlation levels") {
  ScoreRun run;
  JudgmentDataset j;
  const std::vector<std::tuple<std::string, std::string, double, double>> rows = {
      {"a", "x", 0.9, 80}, {"a", "y", 0.5, 40}, {"b", "x", 0.7, 90}, {"b", "y", 0.6, 30}, {"c", "x", 0.2, 10}};
  for (const auto& [seg, sys, m, h] : rows) {
    run.scores.push_back({seg, sys, "Mover-1", m, std::nullopt});
    j.scored.push_back({seg, sys, h});
  }
  j.scored.push_back({"c", "y", 20.0});  // no metric score

  const auto seg = correlate(run, j, Level::kSegment);
  CHECK(seg.n_items == 5);
  CHECK(seg.n_excluded == 1);
  std::vector<double> x = {0.9, 0.5, 0.7, 0.6, 0.2}, y = {80, 40, 90, 30, 10};
  CHECK(seg.primary == doctest::Approx(std::fabs(pearson(x, y))));

  // Two systems always correlate perfectly.
  const auto sys = correlate(run, j, Level::kSystem);
  CHECK(sys.n_items == 2);
  CHECK(std::fabs(sys.primary) == doctest::Approx(1.0));

  const auto sum = correlate(run, j, Level::kSummary);
  CHECK(sum.values.count("spearman") == 1);
  CHECK(sum.values.count("kendall_tau_b") == 1);
}

TEST_CASE("metric equal to the human score correlates perfectly") {
  ScoreRun run;
  JudgmentDataset j;
  for (int i = 0; i < 10; ++i) {
    run.scores.push_back({"s" + std::to_string(i), "x", "BERT-F1", 0.1 * i * i, std::nullopt});
    j.scored.push_back({"s" + std::to_string(i), "x", 0.1 * i * i});
  }
  CHECK(correlate(run, j, Level::kSegment).primary == doctest::Approx(1.0));
}

TEST_CASE("relative ranking correlation counts pairs") {
  ScoreRun run;
  JudgmentDataset j;
  j.kind = JudgmentKind::kRelativeRanking;
  run.scores = {{"a", "x", "m", 0.9, {}}, {"a", "y", "m", 0.4, {}}, {"a", "z", "m", 0.4, {}},
                {"b", "x", "m", 0.1, {}}, {"b", "y", "m", 0.3, {}}};
  j.ranked = {{"a", "x", "y"}, {"a", "y", "z"}, {"b", "x", "y"}, {"a", "x", "z"}, {"b", "x", "q"}};
  // concordant: (a,x,y), (a,x,z); discordant: (b,x,y); tie: (a,y,z); missing: (b,x,q)
  const auto r = correlate(run, j, Level::kSegment);
  CHECK(r.n_items == 4);
  CHECK(r.n_excluded == 1);
  CHECK(r.primary == doctest::Approx((2.0 - 2.0) / 4.0));
  CHECK(correlate(run, j, Level::kSegment, TieRule::kTiesExcluded).primary == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(correlate(run, j, Level::kSystem), InvalidConfig);
}

TEST_CASE("corpus header checks") {
  EmbeddingCorpus c;
  c.add(fixtures::segment("s", {}), {2, 1, "m", "1"});
  CHECK_THROWS_AS(c.add(fixtures::segment("t", {}), {3, 1, "m", "1"}), MalformedHeader);
  // Repeated reference ids are extra references; repeated hypotheses are errors.
  c.add(fixtures::segment("s", {}), {2, 1, "m", "1"});
  CHECK(c.references_of("s").size() == 2);
  c.add(fixtures::segment("s", {}, "x"), {2, 1, "m", "1"});
  CHECK_THROWS_AS(c.add(fixtures::segment("s", {}, "x"), {2, 1, "m", "1"}), DuplicateSegment);
  CHECK_THROWS_AS(c.references_of("nope"), MissingEmbedding);
  c.add_as_hypothesis(fixtures::segment("s", {}), {2, 1, "m", "1"}, "file-stem");
  CHECK(c.hypothesis({"s", "file-stem"}).has_value());
}

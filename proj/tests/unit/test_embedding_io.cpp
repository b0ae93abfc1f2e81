#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "otmetrics/embedding_io.hpp"

using namespace otmetrics;
using fixtures::TempDir;

namespace {

const char* kHeader2x1 =
    R"({"format":"otmetrics-embeddings","version":"1","dim":2,"n_layers":1,"model_id":"toy"})";

std::string token_json(const std::string& surface, int word, bool first, const std::string& layers) {
  return R"({"surface":")" + surface + R"(","word_index":)" + std::to_string(word) +
         R"(,"is_first_piece":)" + (first ? "true" : "false") + R"(,"is_punct":false,"layers":)" + layers + "}";
}

std::string segment_json(const std::string& id, const std::string& tokens) {
  return R"({"segment_id":")" + id + R"(","role":"reference","lang":"en","tokens":[)" + tokens + "]}";
}

}  // namespace

TEST_CASE("minimal well-formed file") {
  TempDir dir;
  fixtures::write_text(dir / "a.jsonl",
                       std::string(kHeader2x1) + "\n" + segment_json("s1", token_json("cat", 0, true, "[[0.0,0.0]]")) + "\n");
  const auto file = read_embedding_file(dir / "a.jsonl");
  CHECK(file.header.dim == 2);
  CHECK(file.header.n_layers == 1);
  REQUIRE(file.segments.size() == 1);
  CHECK(file.segments[0].tokens.size() == 1);
  CHECK(file.segments[0].tokens[0].layers[0] == std::vector<double>{0.0, 0.0});
}

TEST_CASE("continuation piece flagged as first is rejected") {
  TempDir dir;
  fixtures::write_text(dir / "a.jsonl", std::string(kHeader2x1) + "\n" +
                                            segment_json("s1", token_json("smart", 0, true, "[[1,2]]") + "," +
                                                                   token_json("##er", 0, true, "[[1,2]]")) +
                                            "\n");
  EmbeddingReader reader(dir / "a.jsonl");
  try {
    reader.next();
    FAIL("expected BadContinuationFlag");
  } catch (const BadContinuationFlag& e) {
    CHECK(e.record_id() == "s1");
    CHECK(e.token_index() == 1);
    CHECK(e.error_class() == ErrorClass::kSchema);
  }
}

TEST_CASE("vector longer than dim is a dimension mismatch") {
  TempDir dir;
  fixtures::write_text(dir / "a.jsonl", std::string(kHeader2x1) + "\n" +
                                            segment_json("s7", token_json("cat", 0, true, "[[1,2,3]]")) + "\n");
  try {
    read_embedding_file(dir / "a.jsonl");
    FAIL("expected DimensionMismatch");
  } catch (const DimensionMismatch& e) {
    CHECK(e.record_id() == "s7");
    CHECK(e.expected() == 2);
    CHECK(e.got() == 3);
  }
}

TEST_CASE("wrong layer count is a dimension mismatch") {
  TempDir dir;
  fixtures::write_text(dir / "a.jsonl", std::string(kHeader2x1) + "\n" +
                                            segment_json("s1", token_json("cat", 0, true, "[[1,2],[3,4]]")) + "\n");
  CHECK_THROWS_AS(read_embedding_file(dir / "a.jsonl"), DimensionMismatch);
}

TEST_CASE("header problems") {
  TempDir dir;
  fixtures::write_text(dir / "a.jsonl", R"({"format":"otmetrics-embeddings","version":"1","dim":0,"n_layers":1,"model_id":""})"
                                        "\n");
  CHECK_THROWS_AS(read_embedding_file(dir / "a.jsonl"), MalformedHeader);
  fixtures::write_text(dir / "b.jsonl", "not json\n");
  CHECK_THROWS_AS(read_embedding_file(dir / "b.jsonl"), MalformedHeader);
  CHECK_THROWS_AS(read_embedding_file(dir / "missing.jsonl"), IoError);
}

TEST_CASE("hypothesis records need a system id") {
  TempDir dir;
  fixtures::write_text(dir / "a.jsonl", std::string(kHeader2x1) + "\n" +
                                            R"({"segment_id":"s1","role":"hypothesis","lang":"en","tokens":[]})" + "\n");
  CHECK_THROWS_AS(read_embedding_file(dir / "a.jsonl"), MalformedRecord);
}

TEST_CASE("word index must increase exactly at first pieces") {
  TempDir dir;
  fixtures::write_text(dir / "a.jsonl", std::string(kHeader2x1) + "\n" +
                                            segment_json("s1", token_json("a", 0, true, "[[1,2]]") + "," +
                                                                   token_json("b", 0, true, "[[1,2]]")) +
                                            "\n");
  CHECK_THROWS_AS(read_embedding_file(dir / "a.jsonl"), BadWordIndex);
}

TEST_CASE("write then read reproduces the records") {
  TempDir dir;
  std::mt19937_64 rng(3);
  EmbeddingFileHeader header{3, 2, "toy-model", "1"};
  std::vector<SegmentRecord> segs;
  segs.push_back(fixtures::segment("s1", {fixtures::token("smart", 0, fixtures::random_layers(rng, 2, 3)),
                                          fixtures::token("##er", 0, fixtures::random_layers(rng, 2, 3)),
                                          fixtures::token(".", 1, fixtures::random_layers(rng, 2, 3), true)}));
  segs.push_back(fixtures::segment("s1", {fixtures::token("dog", 0, fixtures::random_layers(rng, 2, 3))}, "sysA"));
  write_embedding_file(dir / "rt.jsonl", header, segs);
  const auto back = read_embedding_file(dir / "rt.jsonl");
  CHECK(back.header == header);
  REQUIRE(back.segments.size() == segs.size());
  for (auto& s : segs) {
    for (auto& t : s.tokens) {
      for (auto& l : t.layers) {
        for (auto& x : l) x = round_to_file_precision(x);
      }
    }
  }
  CHECK(back.segments == segs);
}

TEST_CASE("round trip is exact on already-rounded values") {
  TempDir dir;
  std::mt19937_64 rng(11);
  EmbeddingFileHeader header{4, 3, "m", "1"};
  std::vector<SegmentRecord> segs;
  for (int i = 0; i < 5; ++i) {
    auto layers = fixtures::random_layers(rng, 3, 4);
    for (auto& l : layers) {
      for (auto& x : l) x = round_to_file_precision(x * 1e3);
    }
    segs.push_back(fixtures::segment("s" + std::to_string(i), {fixtures::token("w", 0, layers)}));
  }
  write_embedding_file(dir / "a.jsonl", header, segs);
  write_embedding_file(dir / "b.jsonl", header, read_embedding_file(dir / "a.jsonl").segments);
  CHECK(fixtures::read_text(dir / "a.jsonl") == fixtures::read_text(dir / "b.jsonl"));
  CHECK(read_embedding_file(dir / "b.jsonl").segments == segs);
}

TEST_CASE("empty segment list writes a header-only file") {
  TempDir dir;
  write_embedding_file(dir / "e.jsonl", {2, 1, "m", "1"}, {});
  const auto back = read_embedding_file(dir / "e.jsonl");
  CHECK(back.segments.empty());
  CHECK(back.header.dim == 2);
}

TEST_CASE("zero-token segment round-trips") {
  TempDir dir;
  write_embedding_file(dir / "z.jsonl", {2, 1, "m", "1"}, {fixtures::segment("empty", {})});
  const auto back = read_embedding_file(dir / "z.jsonl");
  REQUIRE(back.segments.size() == 1);
  CHECK(back.segments[0].segment_id == "empty");
  CHECK(back.segments[0].tokens.empty());
}

TEST_CASE("writer validates before writing anything") {
  TempDir dir;
  auto bad = fixtures::segment("s1", {fixtures::token("cat", 0, {{1.0, 2.0, 3.0}})});
  CHECK_THROWS_AS(write_embedding_file(dir / "bad.jsonl", {2, 1, "m", "1"}, {bad}), DimensionMismatch);
  CHECK_FALSE(std::filesystem::exists(dir / "bad.jsonl"));
}

TEST_CASE("validation collects every bad line") {
  TempDir dir;
  fixtures::write_text(dir / "a.jsonl", std::string(kHeader2x1) + "\n" +
                                            segment_json("ok", token_json("cat", 0, true, "[[1,2]]")) + "\n" +
                                            segment_json("bad1", token_json("cat", 0, true, "[[1]]")) + "\n" +
                                            "{broken\n" +
                                            segment_json("bad2", token_json("##x", 0, true, "[[1,2]]")) + "\n");
  const auto report = validate_embedding_file(dir / "a.jsonl");
  CHECK(report.segments_ok == 1);
  REQUIRE(report.diagnostics.size() == 3);
  CHECK(report.diagnostics[0].record_id == "bad1");
  CHECK(report.diagnostics[0].code == "DimensionMismatch");
  CHECK(report.diagnostics[1].line == 4);
  CHECK(report.diagnostics[2].code == "BadContinuationFlag");
}

TEST_CASE("reader keeps going after a malformed line") {
  TempDir dir;
  fixtures::write_text(dir / "a.jsonl", std::string(kHeader2x1) + "\n{broken\n" +
                                            segment_json("s2", token_json("cat", 0, true, "[[1,2]]")) + "\n");
  EmbeddingReader reader(dir / "a.jsonl");
  CHECK_THROWS_AS(reader.next(), MalformedRecord);
  auto s = reader.next();
  REQUIRE(s.has_value());
  CHECK(s->segment_id == "s2");
  CHECK_FALSE(reader.next().has_value());
}

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "otmetrics/idf.hpp"

using namespace otmetrics;

TEST_CASE("document frequency weights") {
  const std::vector<std::vector<std::string>> docs = {{"the", "cat"}, {"the", "dog", "the"}, {"the"}};
  const auto t = build_idf(docs, IdfOriginal{});
  CHECK(t.n_docs() == 3);
  CHECK(t.df("the") == 3);
  CHECK(t.weight("the") == 0.0);
  CHECK(t.weight("cat") == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(t.weight("unseen") == doctest::Approx(std::log(4.0)).epsilon(1e-15));
}

TEST_CASE("disabled table weighs everything one") {
  const auto t = build_idf({{"a"}}, IdfDisabled{});
  CHECK(t.is_disabled());
  CHECK(t.weight("a") == 1.0);
  CHECK(t.weight("never seen") == 1.0);
  CHECK(IdfTable::disabled().weight("x") == 1.0);
}

TEST_CASE("empty corpus is rejected") {
  CHECK_THROWS_AS(build_idf({}, IdfOriginal{}), EmptyCorpus);
}

TEST_CASE("sampling the whole pool returns the pool") {
  const std::vector<int> pool = {4, 8, 15, 16, 23, 42};
  for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(sample_idf_corpus(pool, pool.size(), seed) == pool);
}

TEST_CASE("sampling is deterministic in the seed") {
  CHECK(sample_indices(100, 10, 77) == sample_indices(100, 10, 77));
  CHECK(sample_indices(100, 10, 77) != sample_indices(100, 10, 78));
}

TEST_CASE("sampler over 100 seeds yields valid, varied subsets") {
  std::set<std::vector<std::size_t>> distinct;
  std::map<std::size_t, int> hits;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = sample_indices(10, 4, seed);
    REQUIRE(s.size() == 4);
    CHECK(std::is_sorted(s.begin(), s.end()));
    CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
    for (auto i : s) {
      CHECK(i < 10);
      ++hits[i];
    }
    distinct.insert(s);
  }
  // 210 possible subsets; 100 uniform draws are nearly all distinct.
  CHECK(distinct.size() >= 70);
  // Each index is expected 40 times.
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(hits[i] > 20);
    CHECK(hits[i] < 60);
  }
}

TEST_CASE("sampling more than the pool fails") {
  CHECK_THROWS_AS(sample_indices(3, 4, 0), PoolTooSmall);
}

TEST_CASE("uniform_below stays in range and hits every value") {
  std::mt19937_64 rng(1);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto v = uniform_below(rng, 7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("external corpus file") {
  fixtures::TempDir dir;
  fixtures::write_text(dir / "c.txt", "the cat\nthe  dog\n\n");
  const auto docs = load_idf_corpus(dir / "c.txt");
  REQUIRE(docs.size() == 2);
  CHECK(docs[1] == std::vector<std::string>{"the", "dog"});
  const auto t = build_idf(docs, IdfExternalCorpus{dir / "c.txt"});
  CHECK(t.weight("the") == 0.0);
}

TEST_CASE("scope names") {
  for (auto s : {IdfScope::kRefAndHypSeparate, IdfScope::kRefOnly, IdfScope::kSingleCorpus}) {
    CHECK(parse_idf_scope(to_string(s)) == s);
  }
  CHECK_THROWS_AS(parse_idf_scope("nope"), InvalidConfig);
}

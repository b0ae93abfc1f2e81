#pragma once

// Small random corpora written through the interchange format.

#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "otmetrics/embedding_io.hpp"
#include "otmetrics/idf.hpp"

namespace fixtures {

struct ToyCorpus {
  otmetrics::EmbeddingFileHeader header;
  std::vector<otmetrics::SegmentRecord> segments;
  // DA rows: segment, system, score
  std::vector<std::tuple<std::string, std::string, double>> da;
};

struct ToyOptions {
  std::size_t n_segments = 20;
  std::vector<std::string> systems = {"s1", "s2", "s3"};
  std::size_t dim = 4;
  std::size_t n_layers = 12;
  std::uint64_t seed = 1;
};

// Vocabulary words map to fixed per-layer vectors; hypotheses swap a share of
// reference words that grows with the system index. Some words are split into
// pieces and some are punctuation or contraction pieces.
inline ToyCorpus make_toy_corpus(const ToyOptions& opt) {
  static const std::vector<std::vector<std::string>> vocab = {
      {"the"}, {"a"},    {"cat"},  {"dog"},   {"smart", "##er"}, {"river"}, {"of"},
      {"run"}, {"blue"}, {"play", "##ing"}, {"house"}, {"and"}, {"wouldn"}, {"'"},
      {"t"},   {"."},    {","},    {"green"}, {"un", "##clear"}};
  auto is_punct = [](const std::string& s) { return s == "." || s == "," || s == "'"; };

  std::mt19937_64 rng(opt.seed);
  std::map<std::string, std::vector<std::vector<double>>> table;
  auto vec = [&](const std::string& piece) {
    auto it = table.find(piece);
    if (it == table.end()) it = table.emplace(piece, random_layers(rng, opt.n_layers, opt.dim)).first;
    return it->second;
  };
  auto make = [&](const std::string& id, const std::vector<std::size_t>& words, const char* sys) {
    std::vector<otmetrics::TokenRecord> toks;
    for (std::size_t w = 0; w < words.size(); ++w) {
      for (const auto& p : vocab[words[w]]) {
        toks.push_back(token(p, w, vec(p), is_punct(p)));
      }
    }
    return segment(id, std::move(toks), sys);
  };

  ToyCorpus out;
  out.header = {opt.dim, opt.n_layers, "toy", "1"};
  for (std::size_t i = 0; i < opt.n_segments; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "seg%02zu", i);
    std::vector<std::size_t> ref;
    const std::size_t len = 4 + otmetrics::uniform_below(rng, 5);
    for (std::size_t k = 0; k < len; ++k) ref.push_back(otmetrics::uniform_below(rng, vocab.size()));
    out.segments.push_back(make(id, ref, nullptr));
    for (std::size_t s = 0; s < opt.systems.size(); ++s) {
      auto hyp = ref;
      std::size_t changed = 0;
      const double rate = 0.15 + 0.25 * static_cast<double>(s);
      for (auto& w : hyp) {
        if (uniform01(rng) < rate) {
          w = otmetrics::uniform_below(rng, vocab.size());
          ++changed;
        }
      }
      out.segments.push_back(make(id, hyp, opt.systems[s].c_str()));
      const double score = 100.0 * (1.0 - static_cast<double>(changed) / static_cast<double>(hyp.size())) +
                           5.0 * uniform(rng, -1.0, 1.0);
      out.da.emplace_back(id, opt.systems[s], score);
    }
  }
  return out;
}

inline void write_toy(const ToyCorpus& c, const std::filesystem::path& embeddings, const std::filesystem::path& da) {
  otmetrics::write_embedding_file(embeddings, c.header, c.segments);
  std::ostringstream ss;
  ss << "segment_id,system_id,score\n";
  for (const auto& [seg, sys, score] : c.da) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", score);
    ss << seg << ',' << sys << ',' << buf << '\n';
  }
  write_text(da, ss.str());
}

}  // namespace fixtures

// Writes the bundled synthetic corpus: token embeddings for references and
// three systems of decreasing quality, DA judgments and DArr pairs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "otmetrics/embedding_io.hpp"
#include "otmetrics/idf.hpp"

namespace {

using otmetrics::SegmentRecord;
using otmetrics::TokenRecord;

constexpr std::size_t kDim = 8;
constexpr std::size_t kLayers = 12;

struct Word {
  std::vector<std::string> pieces;
  bool punct = false;
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
  std::size_t below(std::size_t n) { return otmetrics::uniform_below(gen_, n); }

 private:
  std::mt19937_64 gen_;
};

const std::vector<Word>& content_words() {
  static const std::vector<Word> w = {
      {{"cat"}},     {{"dog"}},    {{"house"}},  {{"river"}},           {{"green"}},    {{"quickly"}},
      {{"runs"}},    {{"jumped"}}, {{"smart", "##er"}}, {{"un", "##happi", "##ness"}}, {{"play", "##ing"}},
      {{"teacher"}}, {{"garden"}}, {{"music"}},  {{"bright"}},          {{"winter"}},   {{"city"}},
      {{"market"}},  {{"bread"}},  {{"window"}}, {{"letter"}},          {{"morning"}},  {{"jour", "##ney"}},
      {{"mountain"}}, {{"paint", "##ed"}}, {{"quiet"}}, {{"station"}}, {{"yellow"}},   {{"travel", "##ers"}},
  };
  return w;
}

const std::vector<std::string>& stop_words() {
  static const std::vector<std::string> w = {"the", "a", "of", "and", "to", "in", "is",
                                             "it", "was", "on", "for", "with", "this", "that"};
  return w;
}

// Contractions arrive split into word, apostrophe and suffix, as a BERT basic
// tokenizer produces them.
const std::vector<std::vector<std::string>>& contractions() {
  static const std::vector<std::vector<std::string>> w = {
      {"wouldn", "'", "t"}, {"haven", "'", "t"}, {"it", "'", "s"}, {"don", "'", "t"}, {"isn", "'", "t"}};
  return w;
}

bool is_punct_piece(const std::string& s) { return s == "." || s == "," || s == "!" || s == "?" || s == "'"; }

std::vector<Word> sentence(Rng& rng) {
  std::vector<Word> out;
  const std::size_t n = 7 + rng.below(6);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    if (u < 0.55) {
      out.push_back(content_words()[rng.below(content_words().size())]);
    } else if (u < 0.88) {
      out.push_back({{stop_words()[rng.below(stop_words().size())]}});
    } else if (u < 0.95) {
      for (const auto& p : contractions()[rng.below(contractions().size())]) out.push_back({{p}, is_punct_piece(p)});
    } else {
      out.push_back({{","}, true});
    }
  }
  out.push_back({{rng.below(4) == 0 ? "!" : "."}, true});
  return out;
}

// Replaces each non-punctuation word with probability `rate`; returns the
// fraction of words changed.
double corrupt(std::vector<Word>& words, double rate, Rng& rng) {
  std::size_t changed = 0, total = 0;
  for (auto& w : words) {
    if (w.punct) continue;
    ++total;
    if (rng.uniform() < rate) {
      w = content_words()[rng.below(content_words().size())];
      ++changed;
    }
  }
  if (rng.uniform() < rate && words.size() > 3) {
    words.erase(words.begin() + static_cast<std::ptrdiff_t>(1 + rng.below(words.size() - 2)));
  }
  return total ? static_cast<double>(changed) / static_cast<double>(total) : 0.0;
}

std::uint64_t piece_hash(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

class Embedder {
 public:
  explicit Embedder(std::uint64_t seed) : rng_(seed) {}

  std::vector<std::vector<double>> layers(const std::string& piece) {
    const auto& base = table(piece);
    std::vector<std::vector<double>> out(kLayers, std::vector<double>(kDim));
    for (std::size_t l = 0; l < kLayers; ++l) {
      const double depth = static_cast<double>(l) / static_cast<double>(kLayers - 1);
      for (std::size_t d = 0; d < kDim; ++d) {
        out[l][d] = base.first[d] + depth * base.second[d] + 0.05 * rng_.normal();
      }
    }
    return out;
  }

 private:
  const std::pair<std::vector<double>, std::vector<double>>& table(const std::string& piece) {
    auto it = table_.find(piece);
    if (it == table_.end()) {
      Rng local(piece_hash(piece));
      std::vector<double> base(kDim), drift(kDim);
      for (auto& x : base) x = local.normal();
      for (auto& x : drift) x = 0.5 * local.normal();
      it = table_.emplace(piece, std::make_pair(base, drift)).first;
    }
    return it->second;
  }

  Rng rng_;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> table_;
};

SegmentRecord record(const std::string& id, const std::vector<Word>& words, const std::string* system,
                     Embedder& emb) {
  SegmentRecord s;
  s.segment_id = id;
  s.role = system ? otmetrics::SegmentRole::kHypothesis : otmetrics::SegmentRole::kReference;
  if (system) s.system_id = *system;
  s.lang = "en";
  for (std::size_t w = 0; w < words.size(); ++w) {
    for (std::size_t p = 0; p < words[w].pieces.size(); ++p) {
      TokenRecord t;
      t.surface = words[w].pieces[p];
      t.word_index = w;
      t.is_first_piece = p == 0;
      t.is_punct = words[w].punct;
      t.layers = emb.layers(t.surface);
      s.tokens.push_back(std::move(t));
    }
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Write the synthetic embedding corpus and judgments"};
  std::string out_dir;
  std::uint64_t seed = 20201;
  std::size_t n_segments = 30;
  app.add_option("out_dir", out_dir, "Output directory")->required();
  app.add_option("--seed", seed, "Generator seed")->capture_default_str();
  app.add_option("--segments", n_segments, "Number of source segments")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, double>> systems = {{"sysA", 0.1}, {"sysB", 0.3}, {"sysC", 0.6}};
  Rng rng(seed);
  Embedder emb(seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<SegmentRecord> refs, hyps;
  std::ostringstream da, darr;
  da << "segment_id,system_id,score,model_loglik\n";
  darr << "segment_id,better_system,worse_system\n";
  for (std::size_t i = 0; i < n_segments; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "seg%02zu", i + 1);
    const auto ref = sentence(rng);
    refs.push_back(record(id, ref, nullptr, emb));
    std::vector<std::pair<std::string, double>> human;
    for (const auto& [sys, rate] : systems) {
      auto words = ref;
      double changed = corrupt(words, rate, rng);
      if (i + 1 == n_segments && sys == "sysC") {
        words = {{{"."}, true}, {{"!"}, true}};
        changed = 1.0;
      }
      hyps.push_back(record(id, words, &sys, emb));
      const double score = std::clamp(100.0 * (1.0 - changed) + 6.0 * rng.normal(), 0.0, 100.0);
      const double loglik = -20.0 * rng.uniform();
      human.emplace_back(sys, score);
      char line[128];
      std::snprintf(line, sizeof line, "%s,%s,%.2f,%.3f\n", id, sys.c_str(), score, loglik);
      da << line;
    }
    for (std::size_t a = 0; a < human.size(); ++a) {
      for (std::size_t b = a + 1; b < human.size(); ++b) {
        if (std::fabs(human[a].second - human[b].second) < 5.0) continue;
        const bool a_better = human[a].second > human[b].second;
        darr << id << ',' << (a_better ? human[a].first : human[b].first) << ','
             << (a_better ? human[b].first : human[a].first) << '\n';
      }
    }
  }

  std::vector<SegmentRecord> all = refs;
  all.insert(all.end(), hyps.begin(), hyps.end());
  otmetrics::EmbeddingFileHeader header;
  header.dim = kDim;
  header.n_layers = kLayers;
  header.model_id = "synthetic-gaussian-v1";

  std::filesystem::create_directories(out_dir);
  otmetrics::write_embedding_file(std::filesystem::path(out_dir) / "embeddings.jsonl", header, all);
  std::ofstream(std::filesystem::path(out_dir) / "da.csv") << da.str();
  std::ofstream(std::filesystem::path(out_dir) / "darr.csv") << darr.str();
  std::cout << "wrote " << all.size() << " segments to " << out_dir << '\n';
  return 0;
}

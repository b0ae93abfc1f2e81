#include "otmetrics/idf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace otmetrics {

std::string describe(const IdfMode& mode) {
  if (std::holds_alternative<IdfOriginal>(mode)) return "original";
  if (std::holds_alternative<IdfDisabled>(mode)) return "disabled";
  if (const auto* s = std::get_if<IdfSampledCorpus>(&mode)) {
    return "sampled(k=" + std::to_string(s->k) + ",seed=" + std::to_string(s->seed) + ")";
  }
  return "external(" + std::get<IdfExternalCorpus>(mode).path.string() + ")";
}

const char* to_string(IdfScope scope) {
  switch (scope) {
    case IdfScope::kRefAndHypSeparate:
      return "ref-and-hyp";
    case IdfScope::kRefOnly:
      return "ref-only";
    case IdfScope::kSingleCorpus:
      return "single";
  }
  return "?";
}

IdfScope parse_idf_scope(const std::string& text) {
  if (text == "ref-and-hyp") return IdfScope::kRefAndHypSeparate;
  if (text == "ref-only") return IdfScope::kRefOnly;
  if (text == "single") return IdfScope::kSingleCorpus;
  throw InvalidConfig("unknown IDF scope '" + text + "' (expected ref-and-hyp|ref-only|single)");
}

IdfTable IdfTable::disabled() {
  IdfTable t;
  t.disabled_ = true;
  t.mode_ = IdfDisabled{};
  return t;
}

IdfTable IdfTable::explicit_weights(std::unordered_map<std::string, double> weights, double fallback) {
  for (const auto& [key, w] : weights) {
    if (!std::isfinite(w) || w < 0.0) throw InvalidConfig("IDF weight for '" + key + "' must be finite and >= 0");
  }
  if (!std::isfinite(fallback) || fallback < 0.0) throw InvalidConfig("fallback IDF weight must be finite and >= 0");
  IdfTable t;
  t.explicit_ = std::move(weights);
  t.fallback_ = fallback;
  return t;
}

double IdfTable::weight(const std::string& key) const {
  if (disabled_) return 1.0;
  if (explicit_) {
    auto it = explicit_->find(key);
    return it == explicit_->end() ? fallback_ : it->second;
  }
  const double n = static_cast<double>(n_docs_);
  auto it = df_.find(key);
  if (it == df_.end()) return std::log(n + 1.0);
  return std::log((n + 1.0) / (static_cast<double>(it->second) + 1.0));
}

std::size_t IdfTable::df(const std::string& key) const {
  auto it = df_.find(key);
  return it == df_.end() ? 0 : it->second;
}

IdfTable build_idf(const std::vector<std::vector<std::string>>& documents, const IdfMode& mode) {
  if (std::holds_alternative<IdfDisabled>(mode)) return IdfTable::disabled();
  if (std::holds_alternative<IdfSampledCorpus>(mode) && std::get<IdfSampledCorpus>(mode).k == 0) {
    throw InvalidConfig("sampled IDF corpus size k must be >= 1");
  }
  if (documents.empty()) throw EmptyCorpus();
  IdfTable t;
  t.mode_ = mode;
  t.n_docs_ = documents.size();
  std::unordered_set<std::string> seen;
  for (const auto& doc : documents) {
    seen.clear();
    for (const auto& key : doc) {
      if (seen.insert(key).second) ++t.df_[key];
    }
  }
  return t;
}

std::vector<std::vector<std::string>> load_idf_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open IDF corpus '" + path.string() + "'");
  std::vector<std::vector<std::string>> docs;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::vector<std::string> doc;
    std::string key;
    while (ss >> key) doc.push_back(key);
    if (!doc.empty()) docs.push_back(std::move(doc));
  }
  if (in.bad()) throw IoError("read failure on IDF corpus '" + path.string() + "'");
  return docs;
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  // Reject the top partial bucket of the 64-bit range.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

std::vector<std::size_t> sample_indices(std::size_t pool_size, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw InvalidConfig("sample size k must be >= 1");
  if (pool_size < k) throw PoolTooSmall(pool_size, k);
  std::vector<std::size_t> idx(pool_size);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_below(rng, pool_size - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace otmetrics

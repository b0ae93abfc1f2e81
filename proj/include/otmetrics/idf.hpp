#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "otmetrics/error.hpp"

namespace otmetrics {

struct IdfOriginal {
  bool operator==(const IdfOriginal&) const = default;
};
struct IdfDisabled {
  bool operator==(const IdfDisabled&) const = default;
};
struct IdfSampledCorpus {
  std::size_t k = 2000;
  std::uint64_t seed = 0;
  bool operator==(const IdfSampledCorpus&) const = default;
};
struct IdfExternalCorpus {
  std::filesystem::path path;
  bool operator==(const IdfExternalCorpus&) const = default;
};

using IdfMode = std::variant<IdfOriginal, IdfDisabled, IdfSampledCorpus, IdfExternalCorpus>;

std::string describe(const IdfMode& mode);

enum class IdfScope { kRefAndHypSeparate, kRefOnly, kSingleCorpus };

const char* to_string(IdfScope scope);
IdfScope parse_idf_scope(const std::string& text);

class EmptyCorpus : public Error {
 public:
  EmptyCorpus() : Error(ErrorClass::kSchema, "EmptyCorpus", "IDF corpus has no documents") {}
};

class PoolTooSmall : public Error {
 public:
  PoolTooSmall(std::size_t pool, std::size_t k)
      : Error(ErrorClass::kSchema, "PoolTooSmall",
              "cannot sample " + std::to_string(k) + " segments from a pool of " +
                  std::to_string(pool)) {}
};

// Document-frequency table. A document is one segment; df counts presence.
//
//   w(t) = ln((n_docs + 1) / (df(t) + 1)),   unseen t: ln(n_docs + 1)
//
// A disabled table returns 1 for every key.
class IdfTable {
 public:
  static IdfTable disabled();
  // Caller-supplied weights; keys not listed get `fallback`.
  static IdfTable explicit_weights(std::unordered_map<std::string, double> weights, double fallback);

  double weight(const std::string& key) const;

  bool is_disabled() const noexcept { return disabled_; }
  std::size_t n_docs() const noexcept { return n_docs_; }
  std::size_t df(const std::string& key) const;
  const std::unordered_map<std::string, std::size_t>& df_map() const noexcept { return df_; }
  const IdfMode& mode() const noexcept { return mode_; }
  IdfScope scope() const noexcept { return scope_; }
  void set_scope(IdfScope scope) noexcept { scope_ = scope; }

 private:
  friend IdfTable build_idf(const std::vector<std::vector<std::string>>&, const IdfMode&);

  bool disabled_ = false;
  std::optional<std::unordered_map<std::string, double>> explicit_;
  double fallback_ = 0.0;
  std::size_t n_docs_ = 0;
  std::unordered_map<std::string, std::size_t> df_;
  IdfMode mode_ = IdfOriginal{};
  IdfScope scope_ = IdfScope::kSingleCorpus;
};

IdfTable build_idf(const std::vector<std::vector<std::string>>& documents, const IdfMode& mode);

// One document per line, whitespace-separated match keys. Blank lines are skipped.
std::vector<std::vector<std::string>> load_idf_corpus(const std::filesystem::path& path);

// Uniform draw in [0, n) with rejection, so results do not depend on the
// standard library's distribution implementation.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

// Indices of a uniform k-subset of [0, pool_size), ascending. Partial
// Fisher-Yates driven by mt19937_64(seed).
std::vector<std::size_t> sample_indices(std::size_t pool_size, std::size_t k, std::uint64_t seed);

template <typename T>
std::vector<T> sample_idf_corpus(const std::vector<T>& pool, std::size_t k, std::uint64_t seed) {
  std::vector<T> out;
  out.reserve(k);
  for (auto i : sample_indices(pool.size(), k, seed)) out.push_back(pool[i]);
  return out;
}

}  // namespace otmetrics

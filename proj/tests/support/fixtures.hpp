#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "otmetrics/embedding_io.hpp"
#include "otmetrics/preprocess.hpp"

namespace fixtures {

inline std::filesystem::path source_dir() { return OTMETRICS_SOURCE_DIR; }
inline std::filesystem::path data_dir() { return source_dir() / "data"; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("otmetrics-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline otmetrics::TokenRecord token(const std::string& surface, std::size_t word_index,
                                    std::vector<std::vector<double>> layers, bool punct = false) {
  otmetrics::TokenRecord t;
  t.surface = surface;
  t.word_index = word_index;
  t.is_first_piece = surface.rfind("##", 0) != 0;
  t.is_punct = punct;
  t.layers = std::move(layers);
  return t;
}

inline otmetrics::SegmentRecord segment(const std::string& id, std::vector<otmetrics::TokenRecord> tokens,
                                        const char* system = nullptr) {
  otmetrics::SegmentRecord s;
  s.segment_id = id;
  s.role = system ? otmetrics::SegmentRole::kHypothesis : otmetrics::SegmentRole::kReference;
  if (system) s.system_id = system;
  s.lang = "en";
  s.tokens = std::move(tokens);
  return s;
}

// A processed unit with an explicit vector.
inline otmetrics::ProcessedToken unit(const std::string& key, std::vector<double> v) {
  otmetrics::ProcessedToken t;
  t.unit = key;
  t.key = key;
  t.vector = std::move(v);
  return t;
}

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline std::vector<std::vector<double>> random_layers(std::mt19937_64& rng, std::size_t n_layers,
                                                      std::size_t dim) {
  std::vector<std::vector<double>> out(n_layers, std::vector<double>(dim));
  for (auto& l : out) {
    for (auto& x : l) x = uniform(rng, -1.0, 1.0);
  }
  return out;
}

}  // namespace fixtures

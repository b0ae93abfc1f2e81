#include "otmetrics/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace otmetrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_odd_integer(double p) {
  return std::isfinite(p) && std::floor(p) == p && std::fmod(std::fabs(p), 2.0) == 1.0;
}

std::string ascii_lower(std::string s) {
  for (auto& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return s;
}

std::string strip_marker(const std::string& surface) {
  return surface.rfind("##", 0) == 0 ? surface.substr(2) : surface;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n\f\v");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(b, e - b + 1);
}

std::string format_exponent(double p) {
  if (p == kInf) return "inf";
  if (p == -kInf) return "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", p);
  return buf;
}

double power_mean(const std::vector<const std::vector<double>*>& layers, std::size_t d, double p) {
  const double count = static_cast<double>(layers.size());
  if (p == kInf || p == -kInf) {
    double m = (*layers[0])[d];
    for (const auto* l : layers) m = (p > 0) ? std::max(m, (*l)[d]) : std::min(m, (*l)[d]);
    return m;
  }
  if (p == 1.0) {
    double sum = 0.0;
    for (const auto* l : layers) sum += (*l)[d];
    return sum / count;
  }
  if (is_odd_integer(p)) {
    double sum = 0.0;
    for (const auto* l : layers) sum += std::pow((*l)[d], p);
    const double mean = sum / count;
    return std::copysign(std::pow(std::fabs(mean), 1.0 / p), mean);
  }
  double lo = (*layers[0])[d];
  for (const auto* l : layers) lo = std::min(lo, (*l)[d]);
  const double shift = 1.0 + std::fabs(lo);
  double sum = 0.0;
  for (const auto* l : layers) sum += std::pow((*l)[d] + shift, p);
  return std::pow(sum / count, 1.0 / p) - shift;
}

void check_exponents(const PowerMeans& pm) {
  if (pm.exponents.empty()) throw InvalidConfig("power means need at least one exponent");
  for (double p : pm.exponents) {
    if (std::isnan(p) || p == 0.0) {
      throw InvalidConfig("power-mean exponents must be nonzero reals or +/-inf");
    }
  }
}

struct Unit {
  std::string surface;
  std::vector<std::size_t> pieces;
  std::size_t word_index = 0;
  bool punct = false;
  std::string key;
};

// Steps (1)-(3): subword strategy, punctuation, stopwords. Vectors untouched.
std::vector<Unit> select_units(const SegmentRecord& segment, const PreprocessConfig& config) {
  std::vector<Unit> units;
  const auto& toks = segment.tokens;
  switch (config.subword) {
    case SubwordStrategy::kFirstPiece:
    case SubwordStrategy::kAllPieces:
      for (std::size_t i = 0; i < toks.size(); ++i) {
        if (config.subword == SubwordStrategy::kFirstPiece && !toks[i].is_first_piece) continue;
        units.push_back({toks[i].surface, {i}, toks[i].word_index, toks[i].is_punct,
                         match_key(toks[i].surface)});
      }
      break;
    case SubwordStrategy::kAverageAll:
      for (std::size_t i = 0; i < toks.size(); ++i) {
        if (units.empty() || toks[i].word_index != units.back().word_index) {
          units.push_back({"", {}, toks[i].word_index, true, ""});
        }
        auto& u = units.back();
        u.surface += strip_marker(toks[i].surface);
        u.pieces.push_back(i);
        u.punct = u.punct && toks[i].is_punct;
      }
      for (auto& u : units) u.key = match_key(u.surface);
      break;
  }
  std::vector<Unit> kept;
  kept.reserve(units.size());
  for (auto& u : units) {
    if (config.remove_punct && u.punct) continue;
    if (config.stopwords.count(u.key) != 0) continue;
    kept.push_back(std::move(u));
  }
  return kept;
}

}  // namespace

const char* to_string(SubwordStrategy s) {
  switch (s) {
    case SubwordStrategy::kFirstPiece:
      return "first";
    case SubwordStrategy::kAllPieces:
      return "all";
    case SubwordStrategy::kAverageAll:
      return "ave-all";
  }
  return "?";
}

SubwordStrategy parse_subword_strategy(const std::string& text) {
  if (text == "first") return SubwordStrategy::kFirstPiece;
  if (text == "all") return SubwordStrategy::kAllPieces;
  if (text == "ave-all" || text == "average") return SubwordStrategy::kAverageAll;
  throw InvalidConfig("unknown subword strategy '" + text + "' (expected first|all|ave-all)");
}

std::string describe(const LayerAggregation& agg) {
  if (const auto* s = std::get_if<SingleLayer>(&agg)) return "layer:" + std::to_string(s->index);
  const auto& pm = std::get<PowerMeans>(agg);
  std::string out = "pmeans:";
  for (std::size_t i = 0; i < pm.exponents.size(); ++i) {
    if (i) out += ',';
    out += format_exponent(pm.exponents[i]);
  }
  if (pm.last_k) out += "@" + std::to_string(pm.last_k);
  return out;
}

LayerAggregation parse_layer_aggregation(const std::string& text) {
  auto parse_num = [&](const std::string& tok) {
    if (tok == "inf" || tok == "+inf") return kInf;
    if (tok == "-inf") return -kInf;
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || tok.empty()) {
      throw InvalidConfig("bad number '" + tok + "' in layer aggregation '" + text + "'");
    }
    return v;
  };
  if (text.rfind("layer:", 0) == 0) {
    const double v = parse_num(text.substr(6));
    if (std::floor(v) != v) throw InvalidConfig("layer index must be an integer: " + text);
    return SingleLayer{static_cast<int>(v)};
  }
  if (text.rfind("pmeans:", 0) == 0) {
    std::string body = text.substr(7);
    PowerMeans pm;
    pm.exponents.clear();
    if (auto at = body.find('@'); at != std::string::npos) {
      const double k = parse_num(body.substr(at + 1));
      if (k < 0 || std::floor(k) != k) throw InvalidConfig("bad layer count in " + text);
      pm.last_k = static_cast<std::size_t>(k);
      body = body.substr(0, at);
    }
    std::stringstream ss(body);
    std::string tok;
    while (std::getline(ss, tok, ',')) pm.exponents.push_back(parse_num(trim(tok)));
    check_exponents(pm);
    return pm;
  }
  throw InvalidConfig("layer aggregation must be 'layer:<i>' or 'pmeans:<p,...>[@k]', got '" +
                      text + "'");
}

void check_config(const PreprocessConfig& config) {
  const bool none = config.stopword_list_id == "none";
  if (none != config.stopwords.empty()) {
    throw InvalidConfig("stopword_list_id 'none' must go with an empty stopword set (got id '" +
                        config.stopword_list_id + "', " +
                        std::to_string(config.stopwords.size()) + " entries)");
  }
  if (const auto* pm = std::get_if<PowerMeans>(&config.layer_agg)) check_exponents(*pm);
}

PreprocessConfig mover_default_config() {
  PreprocessConfig c;
  c.remove_punct = true;
  c.subword = SubwordStrategy::kFirstPiece;
  c.layer_agg = PowerMeans{{1.0}, 5};
  return c;
}

PreprocessConfig bertscore_default_config() {
  PreprocessConfig c;
  c.remove_punct = false;
  c.subword = SubwordStrategy::kAllPieces;
  c.layer_agg = SingleLayer{8};
  return c;
}

LayerIndexOutOfRange::LayerIndexOutOfRange(long long index, std::size_t n_layers)
    : Error(ErrorClass::kSchema, "LayerIndexOutOfRange",
            "layer selection " + std::to_string(index) + " out of range for " +
                std::to_string(n_layers) + " stored layers") {}

NonRealResult::NonRealResult(double exponent, std::size_t coordinate)
    : Error(ErrorClass::kNumeric, "NonRealResult",
            "power mean with exponent " + format_exponent(exponent) +
                " is undefined at coordinate " + std::to_string(coordinate)) {}

std::vector<double> aggregate_layers(const TokenRecord& token, const LayerAggregation& agg) {
  const std::size_t n = token.layers.size();
  if (n == 0) throw LayerIndexOutOfRange(0, 0);
  if (const auto* single = std::get_if<SingleLayer>(&agg)) {
    const long long idx = single->index < 0 ? static_cast<long long>(n) + single->index : single->index;
    if (idx < 0 || idx >= static_cast<long long>(n)) throw LayerIndexOutOfRange(single->index, n);
    return token.layers[static_cast<std::size_t>(idx)];
  }
  const auto& pm = std::get<PowerMeans>(agg);
  check_exponents(pm);
  const std::size_t take = pm.last_k == 0 ? n : pm.last_k;
  if (take > n) throw LayerIndexOutOfRange(-static_cast<long long>(take), n);
  std::vector<const std::vector<double>*> used;
  for (std::size_t l = n - take; l < n; ++l) used.push_back(&token.layers[l]);
  const std::size_t dim = used.front()->size();

  std::vector<double> out;
  out.reserve(dim * pm.exponents.size());
  for (double p : pm.exponents) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double m = power_mean(used, d, p);
      if (!std::isfinite(m)) throw NonRealResult(p, d);
      out.push_back(m);
    }
  }
  return out;
}

std::string match_key(const std::string& surface) { return ascii_lower(strip_marker(surface)); }

std::vector<ProcessedToken> preprocess_segment(const SegmentRecord& segment,
                                               const PreprocessConfig& config) {
  const auto units = select_units(segment, config);
  std::vector<ProcessedToken> out;
  out.reserve(units.size());
  for (const auto& u : units) {
    ProcessedToken pt;
    pt.unit = u.surface;
    pt.source_word_index = u.word_index;
    pt.key = u.key;
    pt.vector = aggregate_layers(segment.tokens[u.pieces.front()], config.layer_agg);
    if (u.pieces.size() > 1) {
      for (std::size_t k = 1; k < u.pieces.size(); ++k) {
        const auto v = aggregate_layers(segment.tokens[u.pieces[k]], config.layer_agg);
        for (std::size_t d = 0; d < v.size(); ++d) pt.vector[d] += v[d];
      }
      const double count = static_cast<double>(u.pieces.size());
      for (auto& x : pt.vector) x /= count;
    }
    out.push_back(std::move(pt));
  }
  return out;
}

std::vector<LayeredToken> preprocess_segment_layers(const SegmentRecord& segment,
                                                    const PreprocessConfig& config,
                                                    std::size_t last_k) {
  const auto units = select_units(segment, config);
  std::vector<LayeredToken> out;
  out.reserve(units.size());
  for (const auto& u : units) {
    const auto& first = segment.tokens[u.pieces.front()];
    const std::size_t n = first.layers.size();
    if (last_k == 0 || last_k > n) throw LayerIndexOutOfRange(-static_cast<long long>(last_k), n);
    LayeredToken lt;
    lt.unit = u.surface;
    lt.source_word_index = u.word_index;
    lt.key = u.key;
    for (std::size_t l = n - last_k; l < n; ++l) {
      std::vector<double> v = first.layers[l];
      for (std::size_t k = 1; k < u.pieces.size(); ++k) {
        const auto& other = segment.tokens[u.pieces[k]].layers[l];
        for (std::size_t d = 0; d < v.size(); ++d) v[d] += other[d];
      }
      if (u.pieces.size() > 1) {
        for (auto& x : v) x /= static_cast<double>(u.pieces.size());
      }
      lt.layers.push_back(std::move(v));
    }
    out.push_back(std::move(lt));
  }
  return out;
}

std::set<std::string> load_stopword_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stopword list '" + path.string() + "'");
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    auto w = ascii_lower(trim(line));
    if (!w.empty()) words.insert(std::move(w));
  }
  if (in.bad()) throw IoError("read failure on stopword list '" + path.string() + "'");
  return words;
}

}  // namespace otmetrics

#include "otmetrics/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "otmetrics/transport.hpp"

namespace otmetrics {

namespace {

struct Cloud {
  std::vector<Point> points;
  std::vector<double> mass;
};

Cloud ngram_cloud(std::span<const ProcessedToken> tokens, const IdfTable& idf, int n,
                  const char* side) {
  const auto count = tokens.size();
  if (count < static_cast<std::size_t>(n)) {
    throw EmptySide(std::string(side) + " has " + std::to_string(count) +
                    " units after preprocessing, need at least " + std::to_string(n));
  }
  std::vector<double> w(count);
  for (std::size_t i = 0; i < count; ++i) w[i] = idf.weight(tokens[i].key);

  Cloud cloud;
  double total = 0.0;
  for (std::size_t start = 0; start + n <= count; ++start) {
    Point emb(tokens[start].vector.size(), 0.0);
    double mass = 0.0;
    for (std::size_t k = start; k < start + n; ++k) {
      if (tokens[k].vector.size() != emb.size()) {
        throw ShapeMismatch("token vectors differ in dimension");
      }
      for (std::size_t d = 0; d < emb.size(); ++d) emb[d] += w[k] * tokens[k].vector[d];
      mass += w[k];
    }
    cloud.points.push_back(std::move(emb));
    cloud.mass.push_back(mass);
    total += mass;
  }
  if (!(total > 0.0)) {
    throw ZeroMass(std::string(side) + " has zero total IDF weight; every unit is ubiquitous "
                                       "in the IDF corpus");
  }
  return cloud;
}

double side_recall(std::span<const ProcessedToken> from, std::span<const ProcessedToken> to,
                   const IdfTable* idf, std::size_t& zero_tokens) {
  double num = 0.0, den = 0.0;
  for (const auto& t : from) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& u : to) best = std::max(best, cosine_similarity(t.vector, u.vector));
    if (std::all_of(t.vector.begin(), t.vector.end(), [](double x) { return x == 0.0; })) ++zero_tokens;
    const double w = idf ? idf->weight(t.key) : 1.0;
    num += w * best;
    den += w;
  }
  if (!(den > 0.0)) throw ZeroMass("all tokens on the weighted side have zero IDF weight");
  return num / den;
}

}  // namespace

void check_metric_config(const MetricConfig& config) {
  if (const auto* m = std::get_if<MoverConfig>(&config.kind)) {
    if (m->n != 1 && m->n != 2) throw InvalidConfig("MoverScore n must be 1 or 2");
  } else if (const auto* b = std::get_if<BaryConfig>(&config.kind)) {
    if (!(b->epsilon > 0.0) || !std::isfinite(b->epsilon)) {
      throw InvalidConfig("BaryScore epsilon must be positive");
    }
    if (b->n_layers_used == 0) throw InvalidConfig("BaryScore needs at least one layer");
    if (b->max_iter == 0 || !(b->tol > 0.0)) throw InvalidConfig("BaryScore solver limits must be positive");
  }
}

std::string metric_label(const MetricConfig& config) {
  if (const auto* m = std::get_if<MoverConfig>(&config.kind)) return "Mover-" + std::to_string(m->n);
  if (const auto* b = std::get_if<BertScoreConfig>(&config.kind)) {
    switch (b->variant) {
      case BertVariant::kPrecision:
        return "BERT-P";
      case BertVariant::kRecall:
        return "BERT-R";
      case BertVariant::kF1:
        return "BERT-F1";
    }
  }
  const auto& bary = std::get<BaryConfig>(config.kind);
  return bary.distance == BaryDistance::kWasserstein ? "Bary-W" : "Bary-S";
}

IdfScope default_idf_scope(const MetricConfig& config) {
  if (std::holds_alternative<MoverConfig>(config.kind)) return IdfScope::kRefAndHypSeparate;
  if (std::holds_alternative<BertScoreConfig>(config.kind)) return IdfScope::kRefOnly;
  return IdfScope::kSingleCorpus;
}

PreprocessConfig default_preprocess(const MetricConfig& config) {
  if (std::holds_alternative<BertScoreConfig>(config.kind)) return bertscore_default_config();
  return mover_default_config();
}

bool uses_idf(const MetricConfig& config) { return !std::holds_alternative<BaryConfig>(config.kind); }

ScoredPair mover_score(std::span<const ProcessedToken> ref, std::span<const ProcessedToken> hyp,
                       const IdfTable& idf_ref, const IdfTable& idf_hyp, int n) {
  if (n != 1 && n != 2) throw InvalidConfig("MoverScore n must be 1 or 2");
  const auto rc = ngram_cloud(ref, idf_ref, n, "reference");
  const auto hc = ngram_cloud(hyp, idf_hyp, n, "hypothesis");
  const auto cost = cost_matrix(rc.points, hc.points);
  const auto emd = emd_exact(rc.mass, hc.mass, cost);
  ScoredPair out;
  out.metric_label = "Mover-" + std::to_string(n);
  out.raw_distance = emd.cost;
  out.score = 1.0 / (1.0 + emd.cost);
  return out;
}

double cosine_similarity(std::span<const double> x, std::span<const double> y, bool* zero) {
  if (x.size() != y.size()) throw ShapeMismatch("cosine of vectors with different dimensions");
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    dot += x[d] * y[d];
    nx += x[d] * x[d];
    ny += y[d] * y[d];
  }
  if (nx == 0.0 || ny == 0.0) {
    if (zero) *zero = true;
    return 0.0;
  }
  if (zero) *zero = false;
  const double c = dot / (std::sqrt(nx) * std::sqrt(ny));
  return std::clamp(c, -1.0, 1.0);
}

BertScoreResult bert_score(std::span<const ProcessedToken> ref, std::span<const ProcessedToken> hyp,
                           const IdfTable& idf_ref, const IdfTable* idf_hyp) {
  if (ref.empty()) throw EmptySide("reference has no units after preprocessing");
  if (hyp.empty()) throw EmptySide("hypothesis has no units after preprocessing");
  BertScoreResult r;
  std::size_t zero_ref = 0, zero_hyp = 0;
  r.recall = side_recall(ref, hyp, &idf_ref, zero_ref);
  r.precision = side_recall(hyp, ref, idf_hyp, zero_hyp);
  const double s = r.precision + r.recall;
  r.f1 = s == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / s;
  r.zero_vector_tokens = zero_ref + zero_hyp;
  return r;
}

ScoredPair to_scored_pair(const BertScoreResult& r, BertVariant variant) {
  ScoredPair out;
  switch (variant) {
    case BertVariant::kPrecision:
      out.metric_label = "BERT-P";
      out.score = r.precision;
      break;
    case BertVariant::kRecall:
      out.metric_label = "BERT-R";
      out.score = r.recall;
      break;
    case BertVariant::kF1:
      out.metric_label = "BERT-F1";
      out.score = r.f1;
      break;
  }
  return out;
}

namespace {

DiscreteDistribution side_barycenter(std::span<const LayeredToken> tokens, const BaryConfig& cfg,
                                     const char* side, bool& converged) {
  if (tokens.empty()) throw EmptySide(std::string(side) + " has no units after preprocessing");
  const std::size_t layers = cfg.n_layers_used;
  for (const auto& t : tokens) {
    if (t.layers.size() < layers) {
      throw InvalidConfig("BaryScore needs " + std::to_string(layers) + " layers per token, got " +
                          std::to_string(t.layers.size()));
    }
  }
  const std::size_t first = tokens.front().layers.size() - layers;
  const std::size_t t_count = tokens.size();

  // Union support: layer-major, token order within a layer.
  std::vector<Point> support;
  support.reserve(layers * t_count);
  for (std::size_t l = 0; l < layers; ++l) {
    for (const auto& t : tokens) support.push_back(t.layers[first + l]);
  }
  std::vector<DiscreteDistribution> per_layer;
  per_layer.reserve(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    std::vector<double> mass(support.size(), 0.0);
    for (std::size_t k = 0; k < t_count; ++k) mass[l * t_count + k] = 1.0;
    per_layer.push_back(DiscreteDistribution::normalized(support, std::move(mass)));
  }
  const std::vector<double> weights(layers, 1.0 / static_cast<double>(layers));
  auto bary = barycenter_fixed_support(per_layer, weights, cfg.epsilon, cfg.max_iter, cfg.tol);
  converged = bary.converged;
  return std::move(bary.distribution);
}

}  // namespace

BaryScoreResult bary_score(std::span<const LayeredToken> ref, std::span<const LayeredToken> hyp,
                           const BaryConfig& cfg) {
  check_metric_config(MetricConfig{cfg, IdfScope::kSingleCorpus});
  BaryScoreResult out;
  bool ref_ok = true, hyp_ok = true;
  const auto rb = side_barycenter(ref, cfg, "reference", ref_ok);
  const auto hb = side_barycenter(hyp, cfg, "hypothesis", hyp_ok);
  out.barycenters_converged = ref_ok && hyp_ok;

  const auto cost = cost_matrix(rb.support, hb.support);
  out.wasserstein = emd_exact(rb, hb, cost).cost;
  const auto sk = sinkhorn(rb, hb, cost, cfg.epsilon, cfg.max_iter, cfg.tol);
  out.sinkhorn = sk.cost;
  out.sinkhorn_converged = sk.converged;

  const bool use_w = cfg.distance == BaryDistance::kWasserstein;
  const double d = use_w ? out.wasserstein : out.sinkhorn;
  out.pair.metric_label = use_w ? "Bary-W" : "Bary-S";
  out.pair.raw_distance = d;
  out.pair.score = 1.0 / (1.0 + d);
  return out;
}

const char* to_string(MultiRefStrategy s) { return s == MultiRefStrategy::kMean ? "mean" : "max"; }

MultiRefStrategy parse_multi_ref(const std::string& text) {
  if (text == "mean") return MultiRefStrategy::kMean;
  if (text == "max") return MultiRefStrategy::kMax;
  throw InvalidConfig("multi-reference strategy must be mean or max, got '" + text + "'");
}

double aggregate_multi_reference(std::span<const double> scores, MultiRefStrategy strategy) {
  if (scores.empty()) throw EmptyScores();
  if (strategy == MultiRefStrategy::kMax) return *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

}  // namespace otmetrics

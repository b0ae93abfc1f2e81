#include "otmetrics/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

namespace otmetrics {

namespace {

void check_series(std::span<const double> x, std::span<const double> y, const char* stat) {
  if (x.size() != y.size()) {
    throw DegenerateSeries(std::string(stat) + ": series lengths differ (" +
                           std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) throw DegenerateSeries(std::string(stat) + ": need at least 2 pairs");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) throw DegenerateSeries(std::string(stat) + ": NaN in series");
  }
}

// Counts adjacent-swap inversions while merge-sorting `v` in place.
std::uint64_t merge_count(std::vector<double>& v, std::vector<double>& tmp, std::size_t lo,
                          std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = merge_count(v, tmp, lo, mid) + merge_count(v, tmp, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo), tmp.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

// Sum over tie groups of t*(t-1)/2 in a sorted sequence.
template <typename Eq>
std::uint64_t tied_pairs(std::size_t n, Eq eq) {
  std::uint64_t total = 0, run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (eq(i - 1, i)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total + run * (run - 1) / 2;
}

struct KendallCounts {
  double n0, n1, n2, n3, swaps;
};

KendallCounts kendall_counts(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  const auto n1 = tied_pairs(n, [&](std::size_t a, std::size_t b) { return x[idx[a]] == x[idx[b]]; });
  const auto n3 = tied_pairs(n, [&](std::size_t a, std::size_t b) {
    return x[idx[a]] == x[idx[b]] && y[idx[a]] == y[idx[b]];
  });
  std::vector<double> ys(n), tmp(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[idx[i]];
  const auto swaps = merge_count(ys, tmp, 0, n);
  const auto n2 = tied_pairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });
  const double n0 = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return {n0, static_cast<double>(n1), static_cast<double>(n2), static_cast<double>(n3),
          static_cast<double>(swaps)};
}

}  // namespace

double mean(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
  check_series(x, y, "pearson");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateSeries("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double abs_pearson(std::span<const double> x, std::span<const double> y) {
  return std::fabs(pearson(x, y));
}

std::vector<double> mid_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && x[idx[j]] == x[idx[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) r[idx[k]] = avg;
    i = j;
  }
  return r;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  check_series(x, y, "spearman");
  const auto rx = mid_ranks(x);
  const auto ry = mid_ranks(y);
  return pearson(rx, ry);
}

double kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  check_series(x, y, "kendall_tau_b");
  const auto k = kendall_counts(x, y);
  const double denom = std::sqrt((k.n0 - k.n1) * (k.n0 - k.n2));
  if (denom == 0.0) throw DegenerateSeries("kendall_tau_b: one series is constant");
  const double tau = (k.n0 - k.n1 - k.n2 + k.n3 - 2.0 * k.swaps) / denom;
  return std::clamp(tau, -1.0, 1.0);
}

double kendall_tau_a(std::span<const double> x, std::span<const double> y) {
  check_series(x, y, "kendall_tau_a");
  const auto k = kendall_counts(x, y);
  // concordant - discordant = n0 - n1 - n2 + n3 - 2*swaps
  return (k.n0 - k.n1 - k.n2 + k.n3 - 2.0 * k.swaps) / k.n0;
}

const char* to_string(TieRule rule) {
  return rule == TieRule::kTiesDiscordant ? "ties-discordant" : "ties-excluded";
}

double wmt_kendall_like(std::span<const RelativeJudgment> items, TieRule rule) {
  if (items.empty()) throw DegenerateSeries("wmt_kendall_like: no judgments");
  std::size_t conc = 0, disc = 0;
  for (const auto& it : items) {
    if (std::isnan(it.score_better) || std::isnan(it.score_worse)) {
      throw DegenerateSeries("wmt_kendall_like: NaN score");
    }
    if (it.score_better > it.score_worse) {
      ++conc;
    } else if (it.score_better < it.score_worse || rule == TieRule::kTiesDiscordant) {
      ++disc;
    }
  }
  if (conc + disc == 0) throw DegenerateSeries("wmt_kendall_like: every pair is a metric tie");
  return (static_cast<double>(conc) - static_cast<double>(disc)) /
         static_cast<double>(conc + disc);
}

double rd(double a, double b) {
  if (b == 0.0) throw ZeroReference();
  return (a - b) / b * 100.0;
}

double ad(double a, double b) { return a - b; }

double range_of(std::span<const double> xs) {
  if (xs.size() < 2) throw TooFewValues("range", xs.size());
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  return *hi - *lo;
}

double cv(std::span<const double> xs) {
  if (xs.size() < 2) throw TooFewValues("cv", xs.size());
  const double m = mean(xs);
  if (m == 0.0) throw ZeroMean();
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return sd / m * 100.0;
}

}  // namespace otmetrics

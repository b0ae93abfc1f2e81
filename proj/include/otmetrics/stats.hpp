#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "otmetrics/error.hpp"

namespace otmetrics {

class DegenerateSeries : public Error {
 public:
  explicit DegenerateSeries(const std::string& detail)
      : Error(ErrorClass::kNumeric, "DegenerateSeries", detail) {}
};

class TooFewValues : public Error {
 public:
  TooFewValues(const char* stat, std::size_t got)
      : Error(ErrorClass::kNumeric, "TooFewValues",
              std::string(stat) + " needs at least 2 values, got " + std::to_string(got)) {}
};

class ZeroReference : public Error {
 public:
  ZeroReference() : Error(ErrorClass::kNumeric, "ZeroReference", "RD reference value is zero") {}
};

class ZeroMean : public Error {
 public:
  ZeroMean() : Error(ErrorClass::kNumeric, "ZeroMean", "CV undefined for zero mean") {}
};

// All correlation functions require equal lengths >= 2 and no NaN; zero
// variance (or no untied pairs for Kendall) throws DegenerateSeries.
double pearson(std::span<const double> x, std::span<const double> y);
double abs_pearson(std::span<const double> x, std::span<const double> y);
// Pearson on mid-ranks.
double spearman(std::span<const double> x, std::span<const double> y);
// Tie-corrected tau-b, O(n log n) (Knight's merge-sort algorithm).
double kendall_tau_b(std::span<const double> x, std::span<const double> y);
// (concordant - discordant) / (n choose 2), ties count as neither.
double kendall_tau_a(std::span<const double> x, std::span<const double> y);

// 1-based ranks, ties receive the average of the ranks they span.
std::vector<double> mid_ranks(std::span<const double> x);

enum class TieRule { kTiesDiscordant, kTiesExcluded };

const char* to_string(TieRule rule);

struct RelativeJudgment {
  double score_better = 0.0;
  double score_worse = 0.0;
};

// (|Concordant| - |Discordant|) / (|Concordant| + |Discordant|) where a pair is
// concordant iff score_better > score_worse. Metric ties are discordant by
// default, or dropped under kTiesExcluded.
double wmt_kendall_like(std::span<const RelativeJudgment> items,
                        TieRule rule = TieRule::kTiesDiscordant);

// Relative difference in percent, b is the reference value.
double rd(double a, double b);
double ad(double a, double b);
double range_of(std::span<const double> xs);
// Sample (n-1) standard deviation over mean, in percent.
double cv(std::span<const double> xs);

double mean(std::span<const double> xs);

}  // namespace otmetrics

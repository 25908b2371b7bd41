#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace meterguard::eval {

/// Mann-Whitney concordance: P(score_pos > score_neg) with ties counted 1/2.
/// Throws std::invalid_argument unless both classes are present and lengths agree.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Average precision: sum over distinct thresholds (descending) of
/// (recall_k - recall_{k-1}) * precision_k. Throws without positives.
double pr_auc(std::span<const double> scores, std::span<const int> labels);

struct CurvePoint {
  double threshold = 0.0;
  double x = 0.0;  // fpr (ROC) or recall (PR)
  double y = 0.0;  // tpr (ROC) or precision (PR)
};

/// One point per distinct score, from the highest threshold down; the ROC
/// curve also starts at (0, 0).
std::vector<CurvePoint> roc_curve(std::span<const double> scores, std::span<const int> labels);
std::vector<CurvePoint> pr_curve(std::span<const double> scores, std::span<const int> labels);

/// Fold index per sample. Per class, counts differ by at most one across
/// folds. Throws std::invalid_argument when a class has fewer than k members.
std::vector<int> stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

MeanStd mean_std(std::span<const double> values);

/// "0.82 ± 0.07"
std::string format_mean_std(const MeanStd& m, int digits = 2);

struct LagStats {
  std::size_t flagged = 0;
  std::size_t premature = 0;  // negative lags
  double mean = 0.0;
  double median = 0.0;
  long min = 0;
  long max = 0;
};

LagStats lag_stats(std::span<const long> lags);

}  // namespace meterguard::eval

#include "meterguard/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace meterguard::eval {

namespace {

struct Group {
  double score;
  std::uint64_t pos = 0;
  std::uint64_t neg = 0;
};

// Distinct scores in descending order with class counts per score.
std::vector<Group> tie_groups(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("scores and labels differ in length");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<Group> groups;
  for (std::size_t idx : order) {
    if (std::isnan(scores[idx])) throw std::invalid_argument("NaN score");
    if (labels[idx] != 0 && labels[idx] != 1) throw std::invalid_argument("labels must be 0 or 1");
    if (groups.empty() || groups.back().score != scores[idx]) groups.push_back({scores[idx]});
    (labels[idx] == 1 ? groups.back().pos : groups.back().neg) += 1;
  }
  return groups;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  const auto groups = tie_groups(scores, labels);
  std::uint64_t p = 0, n = 0;
  for (const auto& g : groups) {
    p += g.pos;
    n += g.neg;
  }
  if (p == 0 || n == 0) throw std::invalid_argument("ROC AUC needs both classes");
  // Twice the concordance count, kept integral so ties cost nothing in precision.
  std::uint64_t twice = 0, neg_below = n;
  for (const auto& g : groups) {
    neg_below -= g.neg;
    twice += g.pos * (2 * neg_below + g.neg);
  }
  return static_cast<double>(twice) / 2.0 / (static_cast<double>(p) * static_cast<double>(n));
}

double pr_auc(std::span<const double> scores, std::span<const int> labels) {
  const auto groups = tie_groups(scores, labels);
  std::uint64_t p = 0;
  for (const auto& g : groups) p += g.pos;
  if (p == 0) throw std::invalid_argument("PR AUC needs at least one positive");
  double ap = 0.0;
  std::uint64_t tp = 0, fp = 0;
  for (const auto& g : groups) {
    tp += g.pos;
    fp += g.neg;
    if (g.pos == 0) continue;
    ap += static_cast<double>(g.pos) / static_cast<double>(p) *
          (static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  return ap;
}

std::vector<CurvePoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  const auto groups = tie_groups(scores, labels);
  std::uint64_t p = 0, n = 0;
  for (const auto& g : groups) {
    p += g.pos;
    n += g.neg;
  }
  if (p == 0 || n == 0) throw std::invalid_argument("ROC curve needs both classes");
  std::vector<CurvePoint> out{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  std::uint64_t tp = 0, fp = 0;
  for (const auto& g : groups) {
    tp += g.pos;
    fp += g.neg;
    out.push_back({g.score, static_cast<double>(fp) / static_cast<double>(n),
                   static_cast<double>(tp) / static_cast<double>(p)});
  }
  return out;
}

std::vector<CurvePoint> pr_curve(std::span<const double> scores, std::span<const int> labels) {
  const auto groups = tie_groups(scores, labels);
  std::uint64_t p = 0;
  for (const auto& g : groups) p += g.pos;
  if (p == 0) throw std::invalid_argument("PR curve needs at least one positive");
  std::vector<CurvePoint> out;
  std::uint64_t tp = 0, fp = 0;
  for (const auto& g : groups) {
    tp += g.pos;
    fp += g.neg;
    out.push_back({g.score, static_cast<double>(tp) / static_cast<double>(p),
                   static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return out;
}

std::vector<int> stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k-fold needs k >= 2");
  std::vector<std::vector<std::size_t>> by_class(2);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw std::invalid_argument("labels must be 0 or 1");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::vector<int> fold(labels.size(), -1);
  std::size_t offset = 0;
  for (int c = 0; c < 2; ++c) {
    auto& members = by_class[static_cast<std::size_t>(c)];
    if (members.size() < static_cast<std::size_t>(k)) {
      throw std::invalid_argument("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                                  " samples, fewer than k = " + std::to_string(k));
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t j = 0; j < members.size(); ++j) {
      fold[members[j]] = static_cast<int>((offset + j) % static_cast<std::size_t>(k));
    }
    offset = (offset + members.size()) % static_cast<std::size_t>(k);
  }
  return fold;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd m;
  if (values.empty()) return m;
  const double n = static_cast<double>(values.size());
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.std = std::sqrt(ss / n);
  return m;
}

std::string format_mean_std(const MeanStd& m, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f ± %.*f", digits, m.mean, digits, m.std);
  return buf;
}

LagStats lag_stats(std::span<const long> lags) {
  LagStats s;
  s.flagged = lags.size();
  if (lags.empty()) return s;
  std::vector<long> sorted(lags.begin(), lags.end());
  std::sort(sorted.begin(), sorted.end());
  s.premature = static_cast<std::size_t>(std::count_if(sorted.begin(), sorted.end(), [](long l) { return l < 0; }));
  s.min = sorted.front();
  s.max = sorted.back();
  s.mean = static_cast<double>(std::accumulate(sorted.begin(), sorted.end(), 0L)) / static_cast<double>(sorted.size());
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 ? static_cast<double>(sorted[mid])
                               : 0.5 * static_cast<double>(sorted[mid - 1] + sorted[mid]);
  return s;
}

}  // namespace meterguard::eval

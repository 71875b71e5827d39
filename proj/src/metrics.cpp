#include "mvsd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace mvsd {

Confusion confusion(std::span<const int> labels, std::span<const double> scores, double threshold) {
  if (labels.size() != scores.size()) throw std::invalid_argument("labels and scores differ in length");
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = scores[i] > threshold;
    const bool pos = labels[i] == 1;
    if (pred && pos) ++c.tp;
    else if (pred) ++c.fp;
    else if (pos) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double f1_score(const Confusion& c) {
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

double accuracy(const Confusion& c) {
  return c.total() == 0 ? 0.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

std::optional<double> roc_auc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw std::invalid_argument("labels and scores differ in length");
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney: sum of midranks of the positives.
  double rank_sum = 0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) {
        rank_sum += midrank;
        ++pos;
      }
    i = j;
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  const double np = static_cast<double>(pos);
  return (rank_sum - np * (np + 1) / 2) / (np * static_cast<double>(neg));
}

EvalReport make_report(std::span<const int> labels, std::span<const double> scores, double loss) {
  EvalReport r;
  r.counts = confusion(labels, scores);
  r.f1 = f1_score(r.counts);
  r.accuracy = accuracy(r.counts);
  const auto auc = roc_auc(labels, scores);
  r.auc_defined = auc.has_value();
  r.auc = auc.value_or(std::numeric_limits<double>::quiet_NaN());
  r.loss = loss;
  return r;
}

}  // namespace mvsd

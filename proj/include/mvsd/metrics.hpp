#pragma once

#include <cstddef>
#include <optional>
#include <span>

namespace mvsd {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }
};

/// Predicted positive iff score > threshold (argmax of a two-class softmax
/// breaks the 0.5 tie toward the negative class).
Confusion confusion(std::span<const int> labels, std::span<const double> scores, double threshold = 0.5);

/// 2TP / (2TP + FP + FN); 0 when there are neither positives nor predicted positives.
double f1_score(const Confusion& c);
double accuracy(const Confusion& c);

/// Probability that a random positive outscores a random negative, ties
/// counting one half. nullopt when either class is absent.
std::optional<double> roc_auc(std::span<const int> labels, std::span<const double> scores);

struct EvalReport {
  Confusion counts;
  double f1 = 0.0;
  double accuracy = 0.0;
  double auc = 0.0;          // NaN when undefined
  bool auc_defined = false;
  double loss = 0.0;
};

EvalReport make_report(std::span<const int> labels, std::span<const double> scores, double loss);

}  // namespace mvsd

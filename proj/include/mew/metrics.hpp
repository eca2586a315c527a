#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mew {

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Throws SingleClass.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

struct ConcordanceCounts {
  double concordant = 0.0;  // tied risks contribute 0.5
  std::uint64_t comparable = 0;
  std::uint64_t tied_risk = 0;
  double value() const { return concordant / static_cast<double>(comparable); }
};

/// Harrell's C. A pair (i, j) is comparable when T_i < T_j and subject i had
/// an event; it is concordant when risk_i > risk_j. Higher risk means
/// shorter survival. O(m log m).
ConcordanceCounts concordance(std::span<const double> risks, std::span<const double> times,
                              std::span<const int> events);

/// concordance(...).value(). Throws NoComparablePairs.
double c_index(std::span<const double> risks, std::span<const double> times, std::span<const int> events);

struct TaskMetric {
  std::string task;
  std::string metric;  // "auc" or "c_index"
  double value = 0.0;
  bool defined = false;  // false when the split has one class / no comparable pairs
  std::size_t labeled = 0;
  std::uint64_t comparable_pairs = 0;
  std::uint64_t tied_pairs = 0;
};

}  // namespace mew

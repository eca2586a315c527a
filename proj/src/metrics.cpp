#include "mew/metrics.hpp"

#include "mew/error.hpp"

#include <algorithm>
#include <numeric>

namespace mew {

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(Errc::DimMismatch, "scores and labels differ in length");
  const std::size_t m = scores.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of midranks of the positives (Mann-Whitney U).
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < m;) {
    std::size_t j = i;
    std::size_t tied_pos = 0;
    while (j < m && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] != 0) ++tied_pos;
      ++j;
    }
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    rank_sum += midrank * static_cast<double>(tied_pos);
    pos += tied_pos;
    i = j;
  }
  const std::size_t neg = m - pos;
  if (pos == 0 || neg == 0) throw Error(Errc::SingleClass, "AUC needs both classes");
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

namespace {

/// Counts of inserted risk ranks.
class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : tree_(n + 1, 0) {}
  void add(std::size_t i) {
    for (++i; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
  }
  /// Number of inserted ranks < i.
  std::uint64_t prefix(std::size_t i) const {
    std::uint64_t s = 0;
    for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<std::uint64_t> tree_;
};

}  // namespace

ConcordanceCounts concordance(std::span<const double> risks, std::span<const double> times,
                              std::span<const int> events) {
  const std::size_t m = risks.size();
  if (times.size() != m || events.size() != m) throw Error(Errc::DimMismatch, "risks, times, events differ in length");

  // Dense ranks of the risks.
  std::vector<double> distinct(risks.begin(), risks.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<std::size_t> rank(m);
  for (std::size_t i = 0; i < m; ++i) {
    rank[i] = static_cast<std::size_t>(std::lower_bound(distinct.begin(), distinct.end(), risks[i]) - distinct.begin());
  }

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  // Sweep from the longest time down; the tree holds all subjects with a
  // strictly larger time than the current tie group.
  ConcordanceCounts c;
  Fenwick tree(distinct.size());
  std::uint64_t inserted = 0;
  for (std::size_t hi = m; hi > 0;) {
    std::size_t lo = hi - 1;
    while (lo > 0 && times[order[lo - 1]] == times[order[hi - 1]]) --lo;
    for (std::size_t p = lo; p < hi; ++p) {
      const std::size_t i = order[p];
      if (events[i] == 0) continue;
      const std::uint64_t below = tree.prefix(rank[i]);
      const std::uint64_t at_or_below = tree.prefix(rank[i] + 1);
      const std::uint64_t ties = at_or_below - below;
      c.comparable += inserted;
      c.tied_risk += ties;
      c.concordant += static_cast<double>(below) + 0.5 * static_cast<double>(ties);
    }
    for (std::size_t p = lo; p < hi; ++p) tree.add(rank[order[p]]);
    inserted += hi - lo;
    hi = lo;
  }
  return c;
}

double c_index(std::span<const double> risks, std::span<const double> times, std::span<const int> events) {
  const ConcordanceCounts c = concordance(risks, times, events);
  if (c.comparable == 0) throw Error(Errc::NoComparablePairs, "no comparable pairs");
  return c.value();
}

}  // namespace mew

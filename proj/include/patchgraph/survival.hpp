#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "patchgraph/errors.hpp"
#include "patchgraph/labels.hpp"
#include "patchgraph/stats.hpp"

namespace patchgraph {

// Upper bin edges, strictly increasing, last one +infinity. Built from the
// uncensored event times of the training fold only.
struct BinBoundaries {
  std::vector<double> upper_edges;

  std::size_t n_bins() const { return upper_edges.size(); }
};

inline BinBoundaries compute_bin_boundaries(const std::vector<SurvivalLabel>& training_labels,
                                            std::size_t n_bins) {
  if (n_bins < 1) throw ConfigError("bins: n_bins must be >= 1");
  std::vector<double> events;
  for (const auto& l : training_labels)
    if (!l.censored) events.push_back(l.time);
  if (events.empty())
    throw ConfigError("bins: no uncensored training patients, bin boundaries undefined");
  std::sort(events.begin(), events.end());

  BinBoundaries b;
  const std::size_t n = events.size();
  for (std::size_t i = 1; i < n_bins; ++i) {
    const std::size_t idx = (i * n + n_bins - 1) / n_bins - 1;  // ceil(i*n/B) - 1
    double edge = events[std::min(idx, n - 1)];
    // Tied quantiles are nudged upward so the edges stay strictly increasing.
    if (!b.upper_edges.empty() && edge <= b.upper_edges.back())
      edge = std::nextafter(b.upper_edges.back(), std::numeric_limits<double>::infinity());
    b.upper_edges.push_back(edge);
  }
  b.upper_edges.push_back(std::numeric_limits<double>::infinity());
  return b;
}

// First bin whose upper edge is >= time (edge-inclusive).
inline int assign_bin(double time, const BinBoundaries& b) {
  for (std::size_t i = 0; i < b.upper_edges.size(); ++i)
    if (time <= b.upper_edges[i]) return static_cast<int>(i);
  return static_cast<int>(b.upper_edges.size()) - 1;
}

inline void assign_bins(std::vector<SurvivalLabel>& labels, const BinBoundaries& b) {
  for (auto& l : labels) l.bin = assign_bin(l.time, b);
}

// Value-level discrete survival negative log likelihood; the differentiable
// twin lives on the tape.
inline double survival_nll_value(const std::vector<double>& hazards, int bin, bool censored) {
  if (bin < 0 || static_cast<std::size_t>(bin) >= hazards.size())
    throw IndexError("survival_nll: bin out of range");
  for (double h : hazards)
    if (!(h > 0.0 && h < 1.0))
      throw NumericError("survival_nll: hazard outside (0,1)");
  double loss = 0.0;
  const std::size_t b = static_cast<std::size_t>(bin);
  if (censored) {
    for (std::size_t s = 0; s <= b; ++s) loss -= std::log(1.0 - hazards[s]);
  } else {
    loss -= std::log(hazards[b]);
    for (std::size_t s = 0; s < b; ++s) loss -= std::log(1.0 - hazards[s]);
  }
  return loss;
}

struct RiskPrediction {
  std::string patient_id;
  int fold = -1;
  double risk = 0.0;
  double time = 0.0;
  bool censored = false;
};

namespace detail {

// Fenwick tree counting entries at or below a rank.
class RankCounter {
 public:
  explicit RankCounter(std::size_t n) : tree_(n + 1, 0) {}

  void add(std::size_t rank) {
    for (std::size_t i = rank + 1; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
  }

  // Count of inserted ranks <= rank.
  std::size_t count_le(std::size_t rank) const {
    std::size_t s = 0;
    for (std::size_t i = rank + 1; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<std::size_t> tree_;
};

}  // namespace detail

// Harrell concordance index. Pair (i, j) is comparable when T_i < T_j and i
// is uncensored; it is concordant when risk_i > risk_j, and risk ties score
// one half. O(n log n) via rank counting; pairs with equal times never
// compare.
inline double concordance_index(const std::vector<RiskPrediction>& preds) {
  for (const auto& p : preds)
    if (!std::isfinite(p.risk))
      throw ValidationError("c-index: non-finite risk for patient " + p.patient_id);

  std::vector<double> sorted_risks;
  sorted_risks.reserve(preds.size());
  for (const auto& p : preds) sorted_risks.push_back(p.risk);
  std::sort(sorted_risks.begin(), sorted_risks.end());
  sorted_risks.erase(std::unique(sorted_risks.begin(), sorted_risks.end()), sorted_risks.end());
  auto rank_of = [&](double r) {
    return static_cast<std::size_t>(
        std::lower_bound(sorted_risks.begin(), sorted_risks.end(), r) - sorted_risks.begin());
  };

  std::vector<std::size_t> order(preds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].time > preds[b].time;
  });

  detail::RankCounter counter(sorted_risks.size());
  std::size_t inserted = 0;
  std::uint64_t comparable = 0, concordant = 0, tied = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && preds[order[j]].time == preds[order[i]].time) ++j;
    // Everything inserted so far has strictly larger time.
    for (std::size_t k = i; k < j; ++k) {
      const auto& p = preds[order[k]];
      if (p.censored || inserted == 0) continue;
      const std::size_t r = rank_of(p.risk);
      const std::size_t le = counter.count_le(r);
      const std::size_t lt = r == 0 ? 0 : counter.count_le(r - 1);
      comparable += inserted;
      concordant += lt;
      tied += le - lt;
    }
    for (std::size_t k = i; k < j; ++k) {
      counter.add(rank_of(preds[order[k]].risk));
      ++inserted;
    }
    i = j;
  }
  if (comparable == 0)
    throw UndefinedMetricError("c-index: no comparable pairs");
  return (static_cast<double>(concordant) + 0.5 * static_cast<double>(tied)) /
         static_cast<double>(comparable);
}

struct KmPoint {
  double time = 0.0;
  double survival = 1.0;
};

// Product-limit estimator. Subjects censored at an event time are still at
// risk at that time (events before censorings). The curve starts at (0, 1).
inline std::vector<KmPoint> kaplan_meier(const std::vector<SurvivalLabel>& labels) {
  if (labels.empty()) throw ValidationError("kaplan_meier: no subjects");
  std::vector<const SurvivalLabel*> order;
  order.reserve(labels.size());
  for (const auto& l : labels) order.push_back(&l);
  std::sort(order.begin(), order.end(),
            [](const SurvivalLabel* a, const SurvivalLabel* b) { return a->time < b->time; });

  std::vector<KmPoint> curve{{0.0, 1.0}};
  double s = 1.0;
  std::size_t at_risk = labels.size();
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::size_t events = 0;
    while (j < order.size() && order[j]->time == order[i]->time) {
      if (!order[j]->censored) ++events;
      ++j;
    }
    if (events > 0) {
      s *= 1.0 - static_cast<double>(events) / static_cast<double>(at_risk);
      curve.push_back({order[i]->time, s});
    }
    at_risk -= j - i;
    i = j;
  }
  return curve;
}

struct LogrankResult {
  double chi_square = 0.0;
  double p_value = 1.0;
};

// Two-group logrank test. At each pooled event time the observed events in
// group A are compared with the hypergeometric expectation from the pooled
// risk set; the statistic is chi-square with one degree of freedom.
inline LogrankResult logrank_test(const std::vector<SurvivalLabel>& group_a,
                                  const std::vector<SurvivalLabel>& group_b) {
  if (group_a.empty() || group_b.empty())
    throw ValidationError("logrank: both groups must be non-empty");

  struct Entry {
    double time;
    bool censored;
    bool in_a;
  };
  std::vector<Entry> all;
  all.reserve(group_a.size() + group_b.size());
  for (const auto& l : group_a) all.push_back({l.time, l.censored, true});
  for (const auto& l : group_b) all.push_back({l.time, l.censored, false});
  std::sort(all.begin(), all.end(), [](const Entry& x, const Entry& y) { return x.time < y.time; });

  std::size_t at_risk_a = group_a.size();
  std::size_t at_risk_b = group_b.size();
  double observed_a = 0.0, expected_a = 0.0, variance = 0.0;
  std::size_t total_events = 0;

  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    std::size_t d = 0, d_a = 0, leave_a = 0, leave_b = 0;
    while (j < all.size() && all[j].time == all[i].time) {
      if (!all[j].censored) {
        ++d;
        if (all[j].in_a) ++d_a;
      }
      if (all[j].in_a)
        ++leave_a;
      else
        ++leave_b;
      ++j;
    }
    if (d > 0) {
      const double n = static_cast<double>(at_risk_a + at_risk_b);
      const double na = static_cast<double>(at_risk_a);
      const double nb = static_cast<double>(at_risk_b);
      const double dd = static_cast<double>(d);
      observed_a += static_cast<double>(d_a);
      expected_a += dd * na / n;
      if (n > 1.0) variance += dd * (na / n) * (nb / n) * (n - dd) / (n - 1.0);
      total_events += d;
    }
    at_risk_a -= leave_a;
    at_risk_b -= leave_b;
    i = j;
  }

  if (total_events == 0)
    throw UndefinedMetricError("logrank: zero events, test undefined");
  if (variance <= 0.0)
    throw UndefinedMetricError("logrank: zero variance, groups never share a risk set");

  LogrankResult r;
  const double diff = observed_a - expected_a;
  r.chi_square = diff * diff / variance;
  r.p_value = chi_square_upper_tail(r.chi_square, 1.0);
  return r;
}

struct Stratification {
  std::vector<RiskPrediction> low_risk;
  std::vector<RiskPrediction> high_risk;
  double median = 0.0;
  bool degenerate = false;  // every risk tied at the median
};

// Median split of pooled out-of-fold predictions; risks at or below the
// median go to the low-risk group.
inline Stratification stratify_by_median(const std::vector<RiskPrediction>& preds) {
  if (preds.size() < 2)
    throw ValidationError("stratify: need at least 2 predictions");
  std::vector<double> risks;
  risks.reserve(preds.size());
  for (const auto& p : preds) risks.push_back(p.risk);
  std::sort(risks.begin(), risks.end());
  const std::size_t n = risks.size();
  Stratification s;
  s.median = n % 2 == 1 ? risks[n / 2] : 0.5 * (risks[n / 2 - 1] + risks[n / 2]);
  for (const auto& p : preds) {
    if (p.risk <= s.median)
      s.low_risk.push_back(p);
    else
      s.high_risk.push_back(p);
  }
  s.degenerate = s.high_risk.empty() || s.low_risk.empty();
  return s;
}

}  // namespace patchgraph

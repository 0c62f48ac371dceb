// Analysis over profiled result sets: tie-aware per-application orderings
// of memory kinds, the aggregate ordering across applications, thread-
// scaling correlation and linear power models, savings quantification,
// second-rank consistency, and the power/runtime trade-off score.
//
// Everything here is a pure function of immutable inputs.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "memwatt/errors.hpp"

namespace memwatt {

// Two kinds tie when their watts differ by at most tie_rel_tol relative to
// the smaller value. 1% separates every measurably distinct pair we have
// seen while absorbing counter jitter.
inline constexpr double kDefaultTieRelTol = 0.01;

struct Ranking {
  std::string app;  // qualified name, e.g. "BT.A"
  int threads = 0;
  // Tie groups in ascending average power; members sorted by (watts, name).
  std::vector<std::vector<std::string>> groups;
  std::map<std::string, double> values;  // kind -> watts

  bool operator==(const Ranking&) const = default;

  std::set<std::string> kind_set() const {
    std::set<std::string> s;
    for (const auto& [k, v] : values) s.insert(k);
    return s;
  }

  // Flattened order, group by group.
  std::vector<std::string> flat_order() const {
    std::vector<std::string> out;
    for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
    return out;
  }
};

struct AggregateRanking {
  std::map<std::string, double> mean_rank;
  std::vector<std::string> order;

  bool operator==(const AggregateRanking&) const = default;
};

struct PowerModel {
  std::string kind;
  double intercept_w = 0.0;
  double slope_w_per_thread = 0.0;
  double r2 = 0.0;
  double threads_min = 0.0;  // observed fit range, for extrapolation flags
  double threads_max = 0.0;
};

struct Prediction {
  double watts = 0.0;
  bool extrapolated = false;
};

// Ascending ordering of kinds by watts with transitive tie merging: two
// adjacent kinds land in one group when |a-b| <= tol*min(a,b), and tie
// chains collapse into a single group.
inline Ranking rank_for_app(const std::string& app, int threads,
                            const std::vector<std::pair<std::string, double>>& watts_by_kind,
                            double tie_rel_tol = kDefaultTieRelTol) {
  if (watts_by_kind.empty()) throw argument_error("rank_for_app: empty input");
  if (tie_rel_tol < 0) throw argument_error("rank_for_app: negative tie tolerance");

  Ranking ranking;
  ranking.app = app;
  ranking.threads = threads;
  for (const auto& [kind, watts] : watts_by_kind) {
    auto [it, inserted] = ranking.values.emplace(kind, watts);
    if (!inserted) throw argument_error("rank_for_app: duplicate kind \"" + kind + "\"");
  }

  std::vector<std::pair<double, std::string>> sorted;
  for (const auto& [kind, watts] : ranking.values) sorted.emplace_back(watts, kind);
  std::sort(sorted.begin(), sorted.end());

  for (std::size_t i = 0; i < sorted.size(); ++i) {
    bool ties_with_prev =
        i > 0 && std::abs(sorted[i].first - sorted[i - 1].first) <=
                     tie_rel_tol * std::min(sorted[i].first, sorted[i - 1].first);
    if (i == 0 || !ties_with_prev) ranking.groups.emplace_back();
    ranking.groups.back().push_back(sorted[i].second);
  }
  return ranking;
}

// Mean fractional rank across rankings: a tie group spanning positions
// p..q contributes (p+q)/2 to each member. Final order ascends by mean
// rank, ties broken by overall mean watts, then by name.
inline AggregateRanking aggregate_rank(std::span<const Ranking> rankings) {
  if (rankings.empty()) throw argument_error("aggregate_rank: no rankings");
  const std::set<std::string> kinds = rankings.front().kind_set();
  for (const auto& r : rankings)
    if (r.kind_set() != kinds)
      throw argument_error("aggregate_rank: ranking for " + r.app +
                           " has a mismatched kind set");

  std::map<std::string, double> rank_sum;
  std::map<std::string, double> watts_sum;
  for (const auto& r : rankings) {
    std::size_t position = 1;
    for (const auto& group : r.groups) {
      double fractional = static_cast<double>(position) +
                          (static_cast<double>(group.size()) - 1.0) / 2.0;
      for (const auto& kind : group) rank_sum[kind] += fractional;
      position += group.size();
    }
    for (const auto& [kind, watts] : r.values) watts_sum[kind] += watts;
  }

  AggregateRanking agg;
  const double n = static_cast<double>(rankings.size());
  for (const auto& kind : kinds) agg.mean_rank[kind] = rank_sum[kind] / n;

  std::vector<std::string> order(kinds.begin(), kinds.end());
  std::sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
    if (agg.mean_rank[a] != agg.mean_rank[b]) return agg.mean_rank[a] < agg.mean_rank[b];
    if (watts_sum[a] != watts_sum[b]) return watts_sum[a] < watts_sum[b];
    return a < b;
  });
  agg.order = std::move(order);
  return agg;
}

namespace detail {

// Average ranks with ties sharing the mean of the positions they span.
inline std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> idx(xs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });

  std::vector<double> ranks(xs.size(), 0.0);
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0 || syy == 0) throw argument_error("correlation undefined for constant input");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace detail

// Spearman rank correlation with average ranks for ties.
inline double spearman(std::span<const double> threads, std::span<const double> power) {
  if (threads.size() != power.size()) throw argument_error("spearman: length mismatch");
  if (threads.size() < 2) throw argument_error("spearman: need at least 2 points");
  auto rt = detail::average_ranks(threads);
  auto rp = detail::average_ranks(power);
  double rho = detail::pearson(rt, rp);
  return std::clamp(rho, -1.0, 1.0);
}

// Ordinary least squares for P = intercept + slope * threads. A perfect fit
// (including zero-variance power) reports r2 = 1.
inline PowerModel fit_power_model(const std::string& kind, std::span<const double> threads,
                                  std::span<const double> power) {
  if (threads.size() != power.size()) throw argument_error("fit_power_model: length mismatch");
  if (threads.size() < 2) throw argument_error("fit_power_model: need at least 2 points");
  std::set<double> distinct(threads.begin(), threads.end());
  if (distinct.size() < 2)
    throw argument_error("fit_power_model: need at least 2 distinct thread counts");

  const double n = static_cast<double>(threads.size());
  double mt = 0, mp = 0;
  for (std::size_t i = 0; i < threads.size(); ++i) {
    mt += threads[i];
    mp += power[i];
  }
  mt /= n;
  mp /= n;
  double stp = 0, stt = 0, spp = 0;
  for (std::size_t i = 0; i < threads.size(); ++i) {
    stp += (threads[i] - mt) * (power[i] - mp);
    stt += (threads[i] - mt) * (threads[i] - mt);
    spp += (power[i] - mp) * (power[i] - mp);
  }

  PowerModel model;
  model.kind = kind;
  model.slope_w_per_thread = stp / stt;
  model.intercept_w = mp - model.slope_w_per_thread * mt;
  model.threads_min = *std::min_element(threads.begin(), threads.end());
  model.threads_max = *std::max_element(threads.begin(), threads.end());

  double ss_res = 0;
  for (std::size_t i = 0; i < threads.size(); ++i) {
    double fitted = model.intercept_w + model.slope_w_per_thread * threads[i];
    ss_res += (power[i] - fitted) * (power[i] - fitted);
  }
  model.r2 = spp > 0 ? std::clamp(1.0 - ss_res / spp, 0.0, 1.0) : 1.0;
  return model;
}

inline Prediction predict(const PowerModel& model, double threads) {
  if (threads < 1) throw argument_error("predict: threads must be >= 1");
  Prediction p;
  p.watts = model.intercept_w + model.slope_w_per_thread * threads;
  p.extrapolated = threads < model.threads_min || threads > model.threads_max;
  return p;
}

// Fractional power saving of `alt` relative to `ref`; negative when the
// alternative draws more.
inline double savings(double ref_watts, double alt_watts) {
  if (ref_watts <= 0) throw argument_error("savings: reference watts must be positive");
  return (ref_watts - alt_watts) / ref_watts;
}

struct SecondRankReport {
  bool consistent = true;
  // app -> members of its second tie group (sorted).
  std::map<std::string, std::vector<std::string>> second_by_app;
  // apps whose ranking has fewer than two groups; reported, not fatal.
  std::vector<std::string> without_second;

  bool operator==(const SecondRankReport&) const = default;
};

// The second-cheapest kind is where the power/performance balance usually
// hides; this checks whether it is the same kind for every application.
inline SecondRankReport second_rank_report(std::span<const Ranking> rankings) {
  SecondRankReport report;
  std::optional<std::set<std::string>> reference;
  for (const auto& r : rankings) {
    if (r.groups.size() < 2) {
      report.without_second.push_back(r.app);
      continue;
    }
    std::set<std::string> second(r.groups[1].begin(), r.groups[1].end());
    report.second_by_app[r.app] = std::vector<std::string>(second.begin(), second.end());
    if (!reference)
      reference = second;
    else if (*reference != second)
      report.consistent = false;
  }
  return report;
}

struct TradeoffEntry {
  std::string kind;
  double power_w = 0.0;
  double runtime_s = 0.0;
  double score = 0.0;  // lower is better

  bool operator==(const TradeoffEntry&) const = default;
};

// score = w * norm(power) + (1-w) * norm(runtime) with min-max
// normalization across the kinds of one application. A dimension with no
// variation across kinds contributes 0. Entries come back sorted by
// (score, kind).
inline std::vector<TradeoffEntry> tradeoff_scores(
    const std::map<std::string, std::pair<double, double>>& power_runtime_by_kind,
    double weight_power) {
  if (weight_power < 0 || weight_power > 1)
    throw argument_error("tradeoff: weight must be in [0, 1]");
  if (power_runtime_by_kind.empty()) throw argument_error("tradeoff: empty input");

  double pmin = 0, pmax = 0, rmin = 0, rmax = 0;
  bool first = true;
  for (const auto& [kind, pr] : power_runtime_by_kind) {
    if (first) {
      pmin = pmax = pr.first;
      rmin = rmax = pr.second;
      first = false;
    } else {
      pmin = std::min(pmin, pr.first);
      pmax = std::max(pmax, pr.first);
      rmin = std::min(rmin, pr.second);
      rmax = std::max(rmax, pr.second);
    }
  }

  std::vector<TradeoffEntry> out;
  for (const auto& [kind, pr] : power_runtime_by_kind) {
    TradeoffEntry e;
    e.kind = kind;
    e.power_w = pr.first;
    e.runtime_s = pr.second;
    double np = pmax > pmin ? (pr.first - pmin) / (pmax - pmin) : 0.0;
    double nr = rmax > rmin ? (pr.second - rmin) / (rmax - rmin) : 0.0;
    e.score = weight_power * np + (1.0 - weight_power) * nr;
    out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(), [](const TradeoffEntry& a, const TradeoffEntry& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.kind < b.kind;
  });
  return out;
}

}  // namespace memwatt

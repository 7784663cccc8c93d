#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gclrec/dataset.hpp"
#include "gclrec/lightgcn.hpp"
#include "gclrec/parallel.hpp"

namespace gclrec {

/// Full ranking for one user: every item scored, excluded sets removed,
/// descending score with ties broken by ascending item index.
inline std::vector<Index> rank_items(
    const Mat& z, const BipartiteGraph& g, Index user,
    const std::vector<const std::vector<Index>*>& exclude) {
  const Vec scores = score_all_items(z, g, user, 1);
  std::vector<bool> skip(static_cast<std::size_t>(g.n_items()), false);
  for (const auto* set : exclude)
    if (set)
      for (const Index i : *set) skip[static_cast<std::size_t>(i)] = true;
  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(g.n_items()));
  for (Index i = 0; i < g.n_items(); ++i)
    if (!skip[static_cast<std::size_t>(i)]) order.push_back(i);
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  });
  return order;
}

/// |top-k of ranked intersect relevant| / |relevant|; relevant must be sorted.
inline double recall_at_k(const std::vector<Index>& ranked,
                          const std::vector<Index>& relevant, Index k) {
  if (relevant.empty()) throw std::invalid_argument("recall_at_k: empty relevant set");
  Index hits = 0;
  const Index top = std::min<Index>(k, static_cast<Index>(ranked.size()));
  for (Index r = 0; r < top; ++r)
    if (std::binary_search(relevant.begin(), relevant.end(), ranked[static_cast<std::size_t>(r)]))
      ++hits;
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

/// Binary-relevance NDCG with the log2(rank+1) discount.
inline double ndcg_at_k(const std::vector<Index>& ranked,
                        const std::vector<Index>& relevant, Index k) {
  if (relevant.empty()) throw std::invalid_argument("ndcg_at_k: empty relevant set");
  double dcg = 0.0;
  const Index top = std::min<Index>(k, static_cast<Index>(ranked.size()));
  for (Index r = 0; r < top; ++r)
    if (std::binary_search(relevant.begin(), relevant.end(), ranked[static_cast<std::size_t>(r)]))
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  double idcg = 0.0;
  const Index ideal = std::min<Index>(k, static_cast<Index>(relevant.size()));
  for (Index r = 0; r < ideal; ++r)
    idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / idcg;
}

struct GroupMetrics {
  Index n_users = 0;
  /// metric name -> cutoff -> mean value
  std::map<std::string, std::map<Index, double>> values;
};

/// Recall@N / NDCG@N averaged over users with at least one relevant item,
/// with an optional equal-count degree-group breakdown (group 1 = lowest
/// training degree).
struct MetricsReport {
  std::vector<Index> cutoffs;
  Index n_users_evaluated = 0;
  std::map<std::string, std::map<Index, double>> values;
  std::vector<GroupMetrics> groups;  // empty unless group analysis requested
};

/// Evaluates one split under the full-ranking protocol. Items from `exclude`
/// splits are removed from every user's candidate list (train always; add
/// valid when scoring test).
inline MetricsReport evaluate(const Mat& z, const InteractionSet& data,
                              const BipartiteGraph& train_graph, Split target,
                              const std::vector<Index>& cutoffs,
                              Index n_groups = 0, int threads = 1) {
  const auto relevant = data.items_by_user(target);
  const auto train_items = data.items_by_user(Split::kTrain);
  const auto valid_items = target == Split::kTest
                               ? data.items_by_user(Split::kValid)
                               : std::vector<std::vector<Index>>();

  const Index n_users = data.n_users();
  std::vector<Index> eval_users;
  for (Index u = 0; u < n_users; ++u)
    if (!relevant[static_cast<std::size_t>(u)].empty()) eval_users.push_back(u);

  // metric-major rows: [metric][cutoff][user]
  const std::size_t n_eval = eval_users.size();
  std::vector<std::vector<std::vector<double>>> per_user(
      2, std::vector<std::vector<double>>(cutoffs.size(),
                                          std::vector<double>(n_eval, 0.0)));
  parallel_for(static_cast<Index>(n_eval), threads, [&](Index lo, Index hi) {
    for (Index e = lo; e < hi; ++e) {
      const Index u = eval_users[static_cast<std::size_t>(e)];
      std::vector<const std::vector<Index>*> exclude = {
          &train_items[static_cast<std::size_t>(u)]};
      if (target == Split::kTest)
        exclude.push_back(&valid_items[static_cast<std::size_t>(u)]);
      const std::vector<Index> ranked = rank_items(z, train_graph, u, exclude);
      const auto& rel = relevant[static_cast<std::size_t>(u)];
      for (std::size_t c = 0; c < cutoffs.size(); ++c) {
        per_user[0][c][static_cast<std::size_t>(e)] =
            recall_at_k(ranked, rel, cutoffs[c]);
        per_user[1][c][static_cast<std::size_t>(e)] =
            ndcg_at_k(ranked, rel, cutoffs[c]);
      }
    }
  });

  MetricsReport report;
  report.cutoffs = cutoffs;
  report.n_users_evaluated = static_cast<Index>(n_eval);
  const char* names[2] = {"recall", "ndcg"};
  for (int m = 0; m < 2; ++m)
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      double sum = 0.0;
      for (const double v : per_user[m][c]) sum += v;  // user-index order
      report.values[names[m]][cutoffs[c]] =
          n_eval ? sum / static_cast<double>(n_eval) : 0.0;
    }

  if (n_groups > 0) {
    if (static_cast<Index>(n_eval) < n_groups)
      throw std::runtime_error("group_analysis: fewer evaluable users than groups");
    // Sort evaluated users by training degree (stable in user index), then
    // cut into equal-count groups; the remainder pads the earliest groups.
    std::vector<std::size_t> order(n_eval);
    for (std::size_t e = 0; e < n_eval; ++e) order[e] = e;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return train_graph.user_degree_count(eval_users[a]) <
             train_graph.user_degree_count(eval_users[b]);
    });
    const std::size_t base = n_eval / static_cast<std::size_t>(n_groups);
    const std::size_t extra = n_eval % static_cast<std::size_t>(n_groups);
    std::size_t pos = 0;
    for (Index gidx = 0; gidx < n_groups; ++gidx) {
      const std::size_t count = base + (static_cast<std::size_t>(gidx) < extra ? 1 : 0);
      GroupMetrics gm;
      gm.n_users = static_cast<Index>(count);
      for (int m = 0; m < 2; ++m)
        for (std::size_t c = 0; c < cutoffs.size(); ++c) {
          double sum = 0.0;
          for (std::size_t e = pos; e < pos + count; ++e)
            sum += per_user[m][c][order[e]];
          gm.values[names[m]][cutoffs[c]] =
              count ? sum / static_cast<double>(count) : 0.0;
        }
      report.groups.push_back(std::move(gm));
      pos += count;
    }
  }
  return report;
}

inline nlohmann::json report_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["n_users_evaluated"] = report.n_users_evaluated;
  j["cutoffs"] = report.cutoffs;
  for (const auto& [metric, by_cutoff] : report.values)
    for (const auto& [cutoff, value] : by_cutoff)
      j["overall"][metric + "@" + std::to_string(cutoff)] = value;
  for (std::size_t g = 0; g < report.groups.size(); ++g) {
    nlohmann::json jg;
    jg["n_users"] = report.groups[g].n_users;
    for (const auto& [metric, by_cutoff] : report.groups[g].values)
      for (const auto& [cutoff, value] : by_cutoff)
        jg[metric + "@" + std::to_string(cutoff)] = value;
    j["groups"]["G" + std::to_string(g + 1)] = jg;
  }
  return j;
}

/// Flat CSV: metric,cutoff,group,value ("all" for the overall rows).
inline void save_report_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_report_csv: cannot write " + path);
  out << "metric,cutoff,group,value\n";
  char buf[64];
  const auto emit = [&](const std::string& metric, Index cutoff,
                        const std::string& group, double value) {
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    out << metric << ',' << cutoff << ',' << group << ',' << buf << '\n';
  };
  for (const auto& [metric, by_cutoff] : report.values)
    for (const auto& [cutoff, value] : by_cutoff) emit(metric, cutoff, "all", value);
  for (std::size_t g = 0; g < report.groups.size(); ++g)
    for (const auto& [metric, by_cutoff] : report.groups[g].values)
      for (const auto& [cutoff, value] : by_cutoff)
        emit(metric, cutoff, "G" + std::to_string(g + 1), value);
}

}  // namespace gclrec

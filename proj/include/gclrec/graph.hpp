#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gclrec {

using Index = std::int64_t;

struct EdgePair {
  Index user = 0;
  Index item = 0;
  friend bool operator<(const EdgePair& a, const EdgePair& b) {
    return a.user != b.user ? a.user < b.user : a.item < b.item;
  }
  friend bool operator==(const EdgePair& a, const EdgePair& b) {
    return a.user == b.user && a.item == b.item;
  }
};

/// Immutable user-item bipartite graph in CSR form, stored in both
/// directions. Users and items live in separate index spaces:
/// users in [0, n_users), items in [0, n_items).
///
/// Edges have a canonical order: ascending (user, item). The user->item
/// CSR lists edges in canonical order, so the position inside u_items IS
/// the edge id. The item->user CSR carries the canonical edge id alongside
/// each entry so per-edge data (weights, coefficients) is stored once.
class BipartiteGraph {
public:
  BipartiteGraph() = default;

  Index n_users() const { return n_users_; }
  Index n_items() const { return n_items_; }
  Index n_edges() const { return static_cast<Index>(u_items_.size()); }
  bool weighted() const { return !weights_.empty(); }

  const std::vector<Index>& user_offsets() const { return u_offsets_; }
  const std::vector<Index>& user_items() const { return u_items_; }
  const std::vector<Index>& item_offsets() const { return i_offsets_; }
  const std::vector<Index>& item_users() const { return i_users_; }
  /// Canonical edge id for each entry of the item->user direction.
  const std::vector<Index>& item_edge_ids() const { return i_edge_ids_; }
  /// Per-edge weights in canonical order; empty for a binary graph.
  const std::vector<double>& weights() const { return weights_; }

  double weight(Index edge_id) const {
    return weights_.empty() ? 1.0 : weights_[static_cast<std::size_t>(edge_id)];
  }

  Index user_degree_count(Index u) const {
    return u_offsets_[static_cast<std::size_t>(u) + 1] -
           u_offsets_[static_cast<std::size_t>(u)];
  }
  Index item_degree_count(Index i) const {
    return i_offsets_[static_cast<std::size_t>(i) + 1] -
           i_offsets_[static_cast<std::size_t>(i)];
  }

  /// Weighted degree (incident-edge count for binary graphs).
  double user_degree(Index u) const {
    if (!weighted()) return static_cast<double>(user_degree_count(u));
    double d = 0.0;
    for (Index k = u_offsets_[static_cast<std::size_t>(u)];
         k < u_offsets_[static_cast<std::size_t>(u) + 1]; ++k)
      d += weights_[static_cast<std::size_t>(k)];
    return d;
  }
  double item_degree(Index i) const {
    if (!weighted()) return static_cast<double>(item_degree_count(i));
    double d = 0.0;
    for (Index k = i_offsets_[static_cast<std::size_t>(i)];
         k < i_offsets_[static_cast<std::size_t>(i) + 1]; ++k)
      d += weights_[static_cast<std::size_t>(i_edge_ids_[static_cast<std::size_t>(k)])];
    return d;
  }

  /// True if (u, i) is an edge. Binary search over the sorted neighbor row.
  bool has_edge(Index u, Index i) const {
    const auto lo = u_items_.begin() + u_offsets_[static_cast<std::size_t>(u)];
    const auto hi = u_items_.begin() + u_offsets_[static_cast<std::size_t>(u) + 1];
    return std::binary_search(lo, hi, i);
  }

  /// Edges in canonical order.
  std::vector<EdgePair> edge_list() const {
    std::vector<EdgePair> out;
    out.reserve(static_cast<std::size_t>(n_edges()));
    for (Index u = 0; u < n_users_; ++u)
      for (Index k = u_offsets_[static_cast<std::size_t>(u)];
           k < u_offsets_[static_cast<std::size_t>(u) + 1]; ++k)
        out.push_back({u, u_items_[static_cast<std::size_t>(k)]});
    return out;
  }

  static BipartiteGraph build(const std::vector<EdgePair>& interactions,
                              Index n_users, Index n_items,
                              const std::vector<double>* edge_weights = nullptr);

private:
  Index n_users_ = 0;
  Index n_items_ = 0;
  std::vector<Index> u_offsets_;  // n_users + 1
  std::vector<Index> u_items_;    // canonical edge order
  std::vector<Index> i_offsets_;  // n_items + 1
  std::vector<Index> i_users_;
  std::vector<Index> i_edge_ids_;
  std::vector<double> weights_;   // canonical edge order; empty = binary
};

/// Builds the graph from (user, item) pairs. Duplicate pairs are removed.
/// If edge_weights is given it must align with `interactions`; duplicates
/// keep the first occurrence's weight.
inline BipartiteGraph BipartiteGraph::build(
    const std::vector<EdgePair>& interactions, Index n_users, Index n_items,
    const std::vector<double>* edge_weights) {
  if (n_users < 0 || n_items < 0)
    throw std::invalid_argument("build_graph: negative node count");
  if (edge_weights && edge_weights->size() != interactions.size())
    throw std::invalid_argument("build_graph: weight/edge count mismatch");

  for (std::size_t r = 0; r < interactions.size(); ++r) {
    const EdgePair& e = interactions[r];
    if (e.user < 0 || e.user >= n_users || e.item < 0 || e.item >= n_items)
      throw std::out_of_range(
          "build_graph: record " + std::to_string(r) + " (user=" +
          std::to_string(e.user) + ", item=" + std::to_string(e.item) +
          ") outside " + std::to_string(n_users) + "x" +
          std::to_string(n_items));
    if (edge_weights) {
      const double w = (*edge_weights)[r];
      if (!(w >= 0.0 && w <= 1.0))
        throw std::invalid_argument("build_graph: weight of record " +
                                    std::to_string(r) + " outside [0,1]");
    }
  }

  // Sort into canonical order, dropping duplicate pairs (first weight wins).
  std::vector<std::size_t> order(interactions.size());
  for (std::size_t r = 0; r < order.size(); ++r) order[r] = r;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return interactions[a] < interactions[b];
                   });

  BipartiteGraph g;
  g.n_users_ = n_users;
  g.n_items_ = n_items;
  g.u_offsets_.assign(static_cast<std::size_t>(n_users) + 1, 0);
  g.i_offsets_.assign(static_cast<std::size_t>(n_items) + 1, 0);

  std::vector<std::size_t> kept;
  kept.reserve(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k > 0 && interactions[order[k]] == interactions[order[k - 1]]) continue;
    kept.push_back(order[k]);
  }

  g.u_items_.reserve(kept.size());
  if (edge_weights) g.weights_.reserve(kept.size());
  for (const std::size_t r : kept) {
    const EdgePair& e = interactions[r];
    g.u_offsets_[static_cast<std::size_t>(e.user) + 1]++;
    g.i_offsets_[static_cast<std::size_t>(e.item) + 1]++;
    g.u_items_.push_back(e.item);
    if (edge_weights) g.weights_.push_back((*edge_weights)[r]);
  }
  for (Index u = 0; u < n_users; ++u)
    g.u_offsets_[static_cast<std::size_t>(u) + 1] +=
        g.u_offsets_[static_cast<std::size_t>(u)];
  for (Index i = 0; i < n_items; ++i)
    g.i_offsets_[static_cast<std::size_t>(i) + 1] +=
        g.i_offsets_[static_cast<std::size_t>(i)];

  // Fill the item->user direction; iterating edges in canonical order keeps
  // each item's user list sorted.
  g.i_users_.assign(kept.size(), 0);
  g.i_edge_ids_.assign(kept.size(), 0);
  std::vector<Index> cursor(g.i_offsets_.begin(), g.i_offsets_.end() - 1);
  Index edge_id = 0;
  for (const std::size_t r : kept) {
    const EdgePair& e = interactions[r];
    const Index pos = cursor[static_cast<std::size_t>(e.item)]++;
    g.i_users_[static_cast<std::size_t>(pos)] = e.user;
    g.i_edge_ids_[static_cast<std::size_t>(pos)] = edge_id;
    ++edge_id;
  }
  return g;
}

inline BipartiteGraph build_graph(const std::vector<EdgePair>& interactions,
                                  Index n_users, Index n_items) {
  return BipartiteGraph::build(interactions, n_users, n_items);
}

/// Symmetric degree-normalized adjacency: per-edge coefficient
/// c(u,i) = w(u,i) / sqrt(d(u) * d(i)), with epsilon added to each degree
/// before the inverse square root. Shares the graph's CSR structure.
class NormalizedAdjacency {
public:
  NormalizedAdjacency() = default;

  const BipartiteGraph& graph() const { return *graph_; }
  const std::shared_ptr<const BipartiteGraph>& graph_ptr() const { return graph_; }
  const std::vector<double>& coefficients() const { return coef_; }
  const std::vector<double>& user_degrees() const { return deg_user_; }
  const std::vector<double>& item_degrees() const { return deg_item_; }
  double epsilon() const { return epsilon_; }
  /// True when the degrees are weighted sums (so they move with the edge
  /// weights); false for the incident-count alternative.
  bool degrees_track_weights() const { return degrees_track_weights_; }

  double coefficient(Index edge_id) const {
    return coef_[static_cast<std::size_t>(edge_id)];
  }

  static NormalizedAdjacency normalize(std::shared_ptr<const BipartiteGraph> graph,
                                       double epsilon, bool count_degrees = false);

private:
  std::shared_ptr<const BipartiteGraph> graph_;
  std::vector<double> coef_;      // canonical edge order
  std::vector<double> deg_user_;  // weighted degree + epsilon
  std::vector<double> deg_item_;
  double epsilon_ = 0.0;
  bool degrees_track_weights_ = true;
};

inline NormalizedAdjacency NormalizedAdjacency::normalize(
    std::shared_ptr<const BipartiteGraph> graph, double epsilon,
    bool count_degrees) {
  if (!graph) throw std::invalid_argument("normalize: null graph");
  if (epsilon < 0.0) throw std::invalid_argument("normalize: epsilon < 0");
  const BipartiteGraph& g = *graph;

  NormalizedAdjacency adj;
  adj.epsilon_ = epsilon;
  adj.degrees_track_weights_ = !count_degrees;
  adj.deg_user_.resize(static_cast<std::size_t>(g.n_users()));
  adj.deg_item_.resize(static_cast<std::size_t>(g.n_items()));
  for (Index u = 0; u < g.n_users(); ++u)
    adj.deg_user_[static_cast<std::size_t>(u)] =
        (count_degrees ? static_cast<double>(g.user_degree_count(u))
                       : g.user_degree(u)) +
        epsilon;
  for (Index i = 0; i < g.n_items(); ++i)
    adj.deg_item_[static_cast<std::size_t>(i)] =
        (count_degrees ? static_cast<double>(g.item_degree_count(i))
                       : g.item_degree(i)) +
        epsilon;

  adj.coef_.resize(static_cast<std::size_t>(g.n_edges()));
  const auto& offs = g.user_offsets();
  const auto& items = g.user_items();
  for (Index u = 0; u < g.n_users(); ++u) {
    const double du = adj.deg_user_[static_cast<std::size_t>(u)];
    for (Index k = offs[static_cast<std::size_t>(u)];
         k < offs[static_cast<std::size_t>(u) + 1]; ++k) {
      const Index i = items[static_cast<std::size_t>(k)];
      const double di = adj.deg_item_[static_cast<std::size_t>(i)];
      adj.coef_[static_cast<std::size_t>(k)] =
          g.weight(k) / std::sqrt(du * di);
    }
  }
  adj.graph_ = std::move(graph);
  return adj;
}

inline NormalizedAdjacency normalize(std::shared_ptr<const BipartiteGraph> graph,
                                     double epsilon) {
  return NormalizedAdjacency::normalize(std::move(graph), epsilon);
}

/// Default epsilon: 1e-8 for weighted graphs (weighted degrees can approach
/// zero), exact 0 for binary graphs.
inline NormalizedAdjacency normalize(std::shared_ptr<const BipartiteGraph> graph) {
  const double eps = graph && graph->weighted() ? 1e-8 : 0.0;
  return NormalizedAdjacency::normalize(std::move(graph), eps);
}

/// Alternative normalization where degrees count incident edges instead of
/// summing weights; coefficients stay w / sqrt(count_u * count_i).
inline NormalizedAdjacency normalize_with_count_degrees(
    std::shared_ptr<const BipartiteGraph> graph, double epsilon) {
  return NormalizedAdjacency::normalize(std::move(graph), epsilon, true);
}

}  // namespace gclrec

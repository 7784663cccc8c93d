#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "gclrec/dataset.hpp"
#include "gclrec/graph.hpp"
#include "gclrec/lightgcn.hpp"
#include "gclrec/losses.hpp"
#include "gclrec/parallel.hpp"
#include "gclrec/params.hpp"
#include "gclrec/rng.hpp"

namespace gclrec {

/// Union of the original training edges E0 (flag 1) and the suggested edges
/// E1 (flag 0), kept in canonical (user, item) order so a candidate's index
/// doubles as its edge id in the augmented graph.
struct EdgeCandidateSet {
  Index n_users = 0;
  Index n_items = 0;
  std::vector<EdgePair> edges;
  std::vector<std::uint8_t> flags;  // 1 = original, 0 = suggested
  /// Total of per-user deficits where fewer than K_u unobserved items exist.
  Index shortfall = 0;

  Index size() const { return static_cast<Index>(edges.size()); }
  Index n_original() const {
    Index n = 0;
    for (const std::uint8_t f : flags) n += f;
    return n;
  }
  Index n_suggested() const { return size() - n_original(); }

  std::vector<EdgePair> suggested_edges() const {
    std::vector<EdgePair> out;
    for (std::size_t k = 0; k < edges.size(); ++k)
      if (flags[k] == 0) out.push_back(edges[k]);
    return out;
  }
};

/// Uniformly keeps ceil((1-rho) * |E|) edges, dropping the rest.
inline BipartiteGraph random_edge_drop(const BipartiteGraph& g, double rho,
                                       Rng& rng) {
  if (!(rho >= 0.0 && rho < 1.0))
    throw std::invalid_argument("random_edge_drop: rho outside [0, 1)");
  const Index n = g.n_edges();
  const Index keep = static_cast<Index>(
      std::ceil((1.0 - rho) * static_cast<double>(n)));
  if (keep <= 0) throw std::runtime_error("random_edge_drop: all edges dropped");
  std::vector<EdgePair> edges = g.edge_list();
  // Partial Fisher-Yates: the first `keep` slots become the kept sample.
  for (Index k = 0; k < keep; ++k) {
    const Index j = k + static_cast<Index>(
                            rng.below(static_cast<std::uint64_t>(n - k)));
    std::swap(edges[static_cast<std::size_t>(k)],
              edges[static_cast<std::size_t>(j)]);
  }
  edges.resize(static_cast<std::size_t>(keep));
  return build_graph(edges, g.n_users(), g.n_items());
}

/// Adds ceil(p_add * |E1|) uniformly sampled suggested edges to the graph.
inline BipartiteGraph random_edge_add(const BipartiteGraph& g,
                                      const EdgeCandidateSet& candidates,
                                      double p_add, Rng& rng) {
  if (!(p_add >= 0.0 && p_add <= 1.0))
    throw std::invalid_argument("random_edge_add: p_add outside [0, 1]");
  std::vector<EdgePair> pool = candidates.suggested_edges();
  const Index n = static_cast<Index>(pool.size());
  const Index take = static_cast<Index>(
      std::ceil(p_add * static_cast<double>(n)));
  std::vector<EdgePair> edges = g.edge_list();
  for (Index k = 0; k < take; ++k) {
    const Index j = k + static_cast<Index>(
                            rng.below(static_cast<std::uint64_t>(n - k)));
    std::swap(pool[static_cast<std::size_t>(k)],
              pool[static_cast<std::size_t>(j)]);
    edges.push_back(pool[static_cast<std::size_t>(k)]);
  }
  return build_graph(edges, g.n_users(), g.n_items());
}

/// Edge suggestion: for each user u with training degree K_u, the top-K_u
/// unobserved items by pretrained score (ties to the smaller item index).
/// Users short of K_u unobserved items contribute what is available; the
/// deficit is accounted in `shortfall`.
inline EdgeCandidateSet suggest_edges(const Mat& pretrained_z,
                                      const BipartiteGraph& train_graph,
                                      int threads = 1) {
  const Index n_users = train_graph.n_users();
  const Index n_items = train_graph.n_items();
  if (pretrained_z.rows() != n_users + n_items)
    throw std::invalid_argument("suggest_edges: embedding rows do not cover graph");

  std::vector<std::vector<Index>> per_user(static_cast<std::size_t>(n_users));
  std::vector<Index> deficit(static_cast<std::size_t>(n_users), 0);
  parallel_for(n_users, threads, [&](Index lo, Index hi) {
    std::vector<std::pair<double, Index>> scored;
    for (Index u = lo; u < hi; ++u) {
      const Index k_u = train_graph.user_degree_count(u);
      if (k_u == 0) continue;
      const Vec scores = score_all_items(pretrained_z, train_graph, u, 1);
      scored.clear();
      for (Index i = 0; i < n_items; ++i)
        if (!train_graph.has_edge(u, i)) scored.emplace_back(scores[i], i);
      const Index take = std::min<Index>(k_u, static_cast<Index>(scored.size()));
      deficit[static_cast<std::size_t>(u)] = k_u - take;
      const auto by_score_then_index = [](const std::pair<double, Index>& a,
                                          const std::pair<double, Index>& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
      };
      std::partial_sort(scored.begin(), scored.begin() + take, scored.end(),
                        by_score_then_index);
      auto& mine = per_user[static_cast<std::size_t>(u)];
      for (Index k = 0; k < take; ++k) mine.push_back(scored[static_cast<std::size_t>(k)].second);
      std::sort(mine.begin(), mine.end());
    }
  });

  EdgeCandidateSet set;
  set.n_users = n_users;
  set.n_items = n_items;
  const auto& offs = train_graph.user_offsets();
  const auto& items = train_graph.user_items();
  for (Index u = 0; u < n_users; ++u) {
    // Merge the user's original and suggested items in ascending item order
    // so the whole candidate list comes out canonically sorted.
    Index k = offs[static_cast<std::size_t>(u)];
    const Index k_end = offs[static_cast<std::size_t>(u) + 1];
    const auto& sugg = per_user[static_cast<std::size_t>(u)];
    std::size_t s = 0;
    while (k < k_end || s < sugg.size()) {
      if (s >= sugg.size() ||
          (k < k_end && items[static_cast<std::size_t>(k)] < sugg[s])) {
        set.edges.push_back({u, items[static_cast<std::size_t>(k)]});
        set.flags.push_back(1);
        ++k;
      } else {
        set.edges.push_back({u, sugg[s]});
        set.flags.push_back(0);
        ++s;
      }
    }
    set.shortfall += deficit[static_cast<std::size_t>(u)];
  }
  return set;
}

/// Candidate set as `user<TAB>item<TAB>flag` text, raw vocabulary ids.
inline void save_candidates(const EdgeCandidateSet& set,
                            const InteractionSet& vocab,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_candidates: cannot write " + path);
  for (std::size_t k = 0; k < set.edges.size(); ++k)
    out << vocab.user_ids[static_cast<std::size_t>(set.edges[k].user)] << '\t'
        << vocab.item_ids[static_cast<std::size_t>(set.edges[k].item)] << '\t'
        << static_cast<int>(set.flags[k]) << '\n';
}

inline EdgeCandidateSet load_candidates(const std::string& path,
                                        const InteractionSet& vocab) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_candidates: cannot open " + path);
  std::unordered_map<std::string, Index> user_index, item_index;
  for (Index u = 0; u < vocab.n_users(); ++u)
    user_index[vocab.user_ids[static_cast<std::size_t>(u)]] = u;
  for (Index i = 0; i < vocab.n_items(); ++i)
    item_index[vocab.item_ids[static_cast<std::size_t>(i)]] = i;

  struct Entry {
    EdgePair e;
    std::uint8_t flag;
  };
  std::vector<Entry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? std::string::npos
                                                   : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw std::runtime_error("load_candidates: malformed row at line " +
                               std::to_string(line_no) + " of " + path);
    const std::string user = line.substr(0, t1);
    const std::string item = line.substr(t1 + 1, t2 - t1 - 1);
    const std::string flag = line.substr(t2 + 1);
    const auto uit = user_index.find(user);
    const auto iit = item_index.find(item);
    if (uit == user_index.end() || iit == item_index.end())
      throw std::runtime_error("load_candidates: unknown id at line " +
                               std::to_string(line_no) + " of " + path);
    if (flag != "0" && flag != "1")
      throw std::runtime_error("load_candidates: bad flag at line " +
                               std::to_string(line_no) + " of " + path);
    entries.push_back({{uit->second, iit->second},
                       static_cast<std::uint8_t>(flag == "1" ? 1 : 0)});
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.e < b.e; });
  EdgeCandidateSet set;
  set.n_users = vocab.n_users();
  set.n_items = vocab.n_items();
  for (const Entry& e : entries) {
    if (!set.edges.empty() && set.edges.back() == e.e)
      throw std::runtime_error("load_candidates: duplicate edge in " + path);
    set.edges.push_back(e.e);
    set.flags.push_back(e.flag);
  }
  return set;
}

/// Two affine layers over [z_u (.) z_i, origin flag]: hidden width equals the
/// embedding dim with a tanh activation, scalar linear output omega.
struct EdgeOperatorMlp {
  ParamStore params;

  EdgeOperatorMlp() = default;
  EdgeOperatorMlp(Index dim, Rng& rng) {
    params.tensors.push_back(xavier_init("mlp.w1", {dim + 1, dim}, rng));
    params.add("mlp.b1", {dim});
    params.tensors.push_back(xavier_init("mlp.w2", {dim, 1}, rng));
    params.add("mlp.b2", {1});
  }

  Index input_dim() const { return params.tensors[0].shape[0]; }
  Index hidden_dim() const { return params.tensors[0].shape[1]; }

  std::vector<ParamTensor> snapshot_tensors() const { return params.tensors; }
  void load_tensors(const std::vector<ParamTensor>& tensors) {
    if (tensors.size() != 4)
      throw std::invalid_argument("EdgeOperatorMlp: expected 4 tensors");
    params.tensors = tensors;
  }

  /// H = tanh(X W1 + b1), omega = H w2 + b2. tanh is evaluated through exp
  /// (identical to 4.5e-16, saturates correctly) because Eigen vectorizes
  /// exp but not tanh for doubles.
  void forward(const Mat& x, Mat& h, Vec& omega, int threads = 1) const {
    const auto w1 = params[0].matrix();
    const auto& b1 = params[1].values;
    const auto w2 = params[2].matrix();
    const double b2 = params[3].values[0];
    h.resize(x.rows(), hidden_dim());
    omega.resize(x.rows());
    parallel_for(x.rows(), threads, [&](Index lo, Index hi) {
      auto hblk = h.middleRows(lo, hi - lo);
      hblk.noalias() = x.middleRows(lo, hi - lo) * w1;
      hblk.rowwise() += b1.transpose();
      hblk = 1.0 - 2.0 / ((2.0 * hblk).array().exp() + 1.0);
      omega.segment(lo, hi - lo).noalias() = hblk * w2;
      omega.segment(lo, hi - lo).array() += b2;
    });
  }

  /// Accumulates parameter gradients for d(omega). Uses the forward tape
  /// (x, h). Chunked reduction keeps the sums bitwise deterministic.
  void backward(const Mat& x, const Mat& h, const Vec& d_omega, int threads = 1) {
    const auto w2 = params[2].matrix();
    struct Acc {
      Mat dw1;
      Vec db1, dw2;
      double db2 = 0.0;
    };
    Acc init;
    init.dw1 = Mat::Zero(input_dim(), hidden_dim());
    init.db1 = Vec::Zero(hidden_dim());
    init.dw2 = Vec::Zero(hidden_dim());
    Acc total = parallel_reduce<Acc>(
        x.rows(), threads, init,
        [&](Index lo, Index hi, Acc& acc) {
          const auto xblk = x.middleRows(lo, hi - lo);
          const auto hblk = h.middleRows(lo, hi - lo);
          const auto dob = d_omega.segment(lo, hi - lo);
          acc.dw2.noalias() += hblk.transpose() * dob;
          acc.db2 += dob.sum();
          // da = (1 - h^2) .* (d_omega w2^T)
          Mat da = (dob * w2.transpose()).array() *
                   (1.0 - hblk.array().square());
          acc.dw1.noalias() += xblk.transpose() * da;
          acc.db1.noalias() += da.colwise().sum().transpose();
        },
        [](Acc& t, const Acc& p) {
          t.dw1 += p.dw1;
          t.db1 += p.db1;
          t.dw2 += p.dw2;
          t.db2 += p.db2;
        });
    params[0].grad_matrix() += total.dw1;
    params[1].grad += total.db1;
    params[2].grad += total.dw2;
    params[3].grad[0] += total.db2;
  }
};

/// Forward tape of the edge operator. The candidate features are kept here
/// only by the convenience wrappers; the feature-reusing entry points leave
/// `x` empty and receive the features explicitly in the backward call.
struct OperatorTape {
  Mat x;             // candidate features [z_u (.) z_i, flag] (may be empty)
  Mat h;             // hidden activations
  Vec omega;         // MLP outputs
  Vec gumbel_logit;  // log(delta) - log(1 - delta)
  Vec p;             // edge probabilities
  double tau_g = 1.0;
};

/// Candidate feature rows from the (frozen) encoder embedding table,
/// written into `out` (resized if needed, so a caller-owned buffer is
/// reused across batches).
inline void operator_features(const Mat& z0, Index n_users,
                              const EdgeCandidateSet& candidates, Mat& out,
                              int threads = 1) {
  const Index dim = z0.cols();
  out.resize(candidates.size(), dim + 1);
  parallel_for(candidates.size(), threads, [&](Index lo, Index hi) {
    for (Index c = lo; c < hi; ++c) {
      const EdgePair& e = candidates.edges[static_cast<std::size_t>(c)];
      const double* zu = z0.row(e.user).data();
      const double* zi = z0.row(n_users + e.item).data();
      double* row = out.row(c).data();
      for (Index d = 0; d < dim; ++d) row[d] = zu[d] * zi[d];
      row[dim] = static_cast<double>(candidates.flags[static_cast<std::size_t>(c)]);
    }
  });
}

inline Mat operator_features(const Mat& z0, Index n_users,
                             const EdgeCandidateSet& candidates, int threads = 1) {
  Mat out;
  operator_features(z0, n_users, candidates, out, threads);
  return out;
}

/// Gumbel-sigmoid relaxation over prebuilt candidate features:
///   p = sigmoid((log d - log(1-d) + omega) / tau_g).
inline Vec edge_operator_forward_features(const EdgeOperatorMlp& mlp,
                                          const Mat& features, double tau_g,
                                          const Vec& delta, OperatorTape* tape,
                                          int threads = 1) {
  if (tau_g <= 0.0)
    throw std::invalid_argument("edge_operator_forward: tau_g <= 0");
  if (delta.size() != features.rows())
    throw std::invalid_argument("edge_operator_forward: delta count mismatch");
  Mat h_local;
  Mat& h = tape ? tape->h : h_local;  // tape-owned buffer is reused in place
  Vec omega;
  mlp.forward(features, h, omega, threads);
  Vec p(features.rows());
  Vec glogit(features.rows());
  for (Index c = 0; c < features.rows(); ++c) {
    const double d = delta[c];
    glogit[c] = std::log(d) - std::log1p(-d);
    p[c] = sigmoid((glogit[c] + omega[c]) / tau_g);
  }
  if (tape) {
    tape->omega = std::move(omega);
    tape->gumbel_logit = std::move(glogit);
    tape->p = p;
    tape->tau_g = tau_g;
  }
  return p;
}

/// Pinned-noise forward from the embedding table; the tape keeps its own
/// copy of the features so the standalone backward works.
inline Vec edge_operator_forward_pinned(const EdgeOperatorMlp& mlp, const Mat& z0,
                                        Index n_users,
                                        const EdgeCandidateSet& candidates,
                                        double tau_g, const Vec& delta,
                                        OperatorTape* tape, int threads = 1) {
  if (delta.size() != candidates.size())
    throw std::invalid_argument("edge_operator_forward: delta count mismatch");
  if (tape) {
    operator_features(z0, n_users, candidates, tape->x, threads);
    return edge_operator_forward_features(mlp, tape->x, tau_g, delta, tape,
                                          threads);
  }
  const Mat x = operator_features(z0, n_users, candidates, threads);
  return edge_operator_forward_features(mlp, x, tau_g, delta, nullptr, threads);
}

/// Fresh-noise forward: one delta ~ Uniform(0,1) per candidate per pass.
inline Vec edge_operator_forward(const EdgeOperatorMlp& mlp, const Mat& z0,
                                 Index n_users, const EdgeCandidateSet& candidates,
                                 double tau_g, Rng& rng, OperatorTape* tape,
                                 int threads = 1) {
  Vec delta(candidates.size());
  for (Index c = 0; c < candidates.size(); ++c) delta[c] = rng.uniform_open01();
  return edge_operator_forward_pinned(mlp, z0, n_users, candidates, tau_g, delta,
                                      tape, threads);
}

/// Pushes dL/dp through the Gumbel sigmoid and the MLP, accumulating into
/// the MLP's gradient store. `features` must be the matrix the forward saw.
inline void edge_operator_backward(EdgeOperatorMlp& mlp, const OperatorTape& tape,
                                   const Mat& features, const Vec& d_p,
                                   int threads = 1) {
  if (d_p.size() != tape.p.size())
    throw std::invalid_argument("edge_operator_backward: gradient count mismatch");
  Vec d_omega(d_p.size());
  for (Index c = 0; c < d_p.size(); ++c)
    d_omega[c] = d_p[c] * tape.p[c] * (1.0 - tape.p[c]) / tape.tau_g;
  mlp.backward(features, tape.h, d_omega, threads);
}

inline void edge_operator_backward(EdgeOperatorMlp& mlp, const OperatorTape& tape,
                                   const Vec& d_p, int threads = 1) {
  if (tape.x.size() == 0)
    throw std::invalid_argument(
        "edge_operator_backward: tape has no features; pass them explicitly");
  edge_operator_backward(mlp, tape, tape.x, d_p, threads);
}

/// Weighted augmented adjacency over the candidate edges: weights are the
/// operator probabilities and the normalization uses the weighted degrees
/// (or incident counts when count_degrees is set).
inline NormalizedAdjacency build_augmented_adjacency(
    const EdgeCandidateSet& candidates, const Vec& p, double epsilon = 1e-8,
    bool count_degrees = false) {
  if (p.size() != candidates.size())
    throw std::invalid_argument("build_augmented_adjacency: probability count mismatch");
  std::vector<double> weights(static_cast<std::size_t>(p.size()));
  for (Index c = 0; c < p.size(); ++c) {
    if (!(p[c] >= 0.0 && p[c] <= 1.0))
      throw std::invalid_argument("build_augmented_adjacency: probability outside [0,1]");
    weights[static_cast<std::size_t>(c)] = p[c];
  }
  auto graph = std::make_shared<BipartiteGraph>(BipartiteGraph::build(
      candidates.edges, candidates.n_users, candidates.n_items, &weights));
  if (graph->n_edges() != candidates.size())
    throw std::invalid_argument("build_augmented_adjacency: duplicate candidates");
  if (count_degrees) return normalize_with_count_degrees(std::move(graph), epsilon);
  return NormalizedAdjacency::normalize(std::move(graph), epsilon);
}

}  // namespace gclrec

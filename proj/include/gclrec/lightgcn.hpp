#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "gclrec/graph.hpp"
#include "gclrec/parallel.hpp"
#include "gclrec/params.hpp"

namespace gclrec {

/// Stacked embedding table: user rows in [0, n_users), item rows in
/// [n_users, n_users + n_items).
inline Index item_row(const BipartiteGraph& g, Index item) {
  return g.n_users() + item;
}

/// Per-layer embeddings retained for the backward pass, together with the
/// adjacency the forward pass used (owned, so the tape can outlive the
/// caller's adjacency object).
struct PropagationTape {
  NormalizedAdjacency adj;
  std::vector<Mat> layers;  // Z^0 .. Z^L
  bool empty() const { return layers.empty(); }
  Index depth() const { return static_cast<Index>(layers.size()) - 1; }
};

namespace detail {

/// One application of the normalized adjacency: out = A_hat * in.
/// Row-sharded; each output row is owned by one worker, so the result is
/// bitwise deterministic for any thread count.
inline void spmm(const NormalizedAdjacency& adj, const Mat& in, Mat& out,
                 int threads) {
  const BipartiteGraph& g = adj.graph();
  const Index n_users = g.n_users();
  const Index n_items = g.n_items();
  out.setZero(in.rows(), in.cols());
  const auto& coef = adj.coefficients();

  parallel_for(n_users, threads, [&](Index lo, Index hi) {
    const auto& offs = g.user_offsets();
    const auto& items = g.user_items();
    for (Index u = lo; u < hi; ++u) {
      auto row = out.row(u);
      for (Index k = offs[static_cast<std::size_t>(u)];
           k < offs[static_cast<std::size_t>(u) + 1]; ++k)
        row += coef[static_cast<std::size_t>(k)] *
               in.row(n_users + items[static_cast<std::size_t>(k)]);
    }
  });
  parallel_for(n_items, threads, [&](Index lo, Index hi) {
    const auto& offs = g.item_offsets();
    const auto& users = g.item_users();
    const auto& ids = g.item_edge_ids();
    for (Index i = lo; i < hi; ++i) {
      auto row = out.row(n_users + i);
      for (Index k = offs[static_cast<std::size_t>(i)];
           k < offs[static_cast<std::size_t>(i) + 1]; ++k)
        row += coef[static_cast<std::size_t>(ids[static_cast<std::size_t>(k)])] *
               in.row(users[static_cast<std::size_t>(k)]);
    }
  });
}

}  // namespace detail

/// LightGCN forward pass: Z^{l+1} = A_hat Z^l, output is the uniform mean
/// of Z^0..Z^L. The tape keeps every layer for the backward pass.
inline Mat propagate(const NormalizedAdjacency& adj, const Mat& z0, Index layers,
                     PropagationTape* tape = nullptr, int threads = 1) {
  const BipartiteGraph& g = adj.graph();
  if (z0.rows() != g.n_users() + g.n_items())
    throw std::invalid_argument("propagate: embedding row count mismatch");
  if (layers < 0) throw std::invalid_argument("propagate: negative layer count");

  if (tape) {
    tape->adj = adj;
    tape->layers.clear();
    tape->layers.reserve(static_cast<std::size_t>(layers) + 1);
    tape->layers.push_back(z0);
  }
  Mat mean = z0;
  Mat cur = z0;
  Mat next;
  for (Index l = 1; l <= layers; ++l) {
    detail::spmm(adj, cur, next, threads);
    if (!next.allFinite())
      throw std::runtime_error("propagate: non-finite values at layer " +
                               std::to_string(l));
    cur.swap(next);
    mean += cur;
    if (tape) tape->layers.push_back(cur);
  }
  mean /= static_cast<double>(layers + 1);
  return mean;
}

/// Gradients of the propagation output. dz_final is the loss gradient with
/// respect to the layer-averaged output; returns the gradient with respect
/// to Z^0 and, when d_weights is non-null, with respect to each edge weight
/// of the (weighted) adjacency, including the chain through the weighted
/// degrees inside c(u,i) = w / sqrt(d(u) d(i)).
inline Mat propagate_backward(const PropagationTape& tape, const Mat& dz_final,
                              std::vector<double>* d_weights = nullptr,
                              int threads = 1) {
  if (tape.empty()) throw std::invalid_argument("propagate_backward: empty tape");
  const NormalizedAdjacency& adj = tape.adj;
  const BipartiteGraph& g = adj.graph();
  const Index layers = tape.depth();
  if (dz_final.rows() != g.n_users() + g.n_items() ||
      dz_final.cols() != tape.layers[0].cols())
    throw std::invalid_argument("propagate_backward: gradient shape mismatch");

  const double scale = 1.0 / static_cast<double>(layers + 1);
  // d_coef[e] = dL/dc_e accumulated over all layer transitions.
  std::vector<double> d_coef;
  if (d_weights) d_coef.assign(static_cast<std::size_t>(g.n_edges()), 0.0);

  Mat grad = scale * dz_final;  // dL/dZ^L
  Mat tmp;
  for (Index l = layers - 1; l >= 0; --l) {
    if (d_weights) {
      // Transition Z^{l+1} = A_hat Z^l contributes, for edge e = (u, i),
      // dL/dc_e += grad[u] . Z^l[i] + grad[i] . Z^l[u]   (A_hat symmetric).
      const Mat& zl = tape.layers[static_cast<std::size_t>(l)];
      const auto& offs = g.user_offsets();
      const auto& items = g.user_items();
      const Index n_users = g.n_users();
      parallel_for(n_users, threads, [&](Index lo, Index hi) {
        for (Index u = lo; u < hi; ++u) {
          for (Index k = offs[static_cast<std::size_t>(u)];
               k < offs[static_cast<std::size_t>(u) + 1]; ++k) {
            const Index irow = n_users + items[static_cast<std::size_t>(k)];
            d_coef[static_cast<std::size_t>(k)] +=
                grad.row(u).dot(zl.row(irow)) +
                grad.row(irow).dot(zl.row(u));
          }
        }
      });
    }
    detail::spmm(adj, grad, tmp, threads);  // A_hat^T = A_hat
    grad.swap(tmp);
    grad += scale * dz_final;
  }

  if (d_weights) {
    // c_e = w_e / sqrt(d(u) d(i)) with d(v) = sum of incident weights + eps:
    //   dc_e/dw_e   = 1/sqrt(d(u) d(i)) - c_e/(2 d(u)) - c_e/(2 d(i))
    //   dc_e/dw_e'  = -c_e/(2 d(v))   for e' != e sharing endpoint v.
    // Folding over edges with S(v) = sum_{e at v} dL/dc_e * c_e gives
    //   dL/dw_e = dL/dc_e / sqrt(d(u) d(i)) - S(u)/(2 d(u)) - S(i)/(2 d(i)).
    // With count-based degrees the degree terms vanish.
    const auto& du = adj.user_degrees();
    const auto& di = adj.item_degrees();
    const auto& coef = adj.coefficients();
    const Index n_users = g.n_users();
    const bool coupled = adj.degrees_track_weights();
    std::vector<double> s_user(static_cast<std::size_t>(n_users), 0.0);
    std::vector<double> s_item(static_cast<std::size_t>(g.n_items()), 0.0);
    const auto& offs = g.user_offsets();
    const auto& items = g.user_items();
    if (coupled) {
      for (Index u = 0; u < n_users; ++u)
        for (Index k = offs[static_cast<std::size_t>(u)];
             k < offs[static_cast<std::size_t>(u) + 1]; ++k) {
          const double gc = d_coef[static_cast<std::size_t>(k)] *
                            coef[static_cast<std::size_t>(k)];
          s_user[static_cast<std::size_t>(u)] += gc;
          s_item[static_cast<std::size_t>(items[static_cast<std::size_t>(k)])] += gc;
        }
    }
    d_weights->assign(static_cast<std::size_t>(g.n_edges()), 0.0);
    parallel_for(n_users, threads, [&](Index lo, Index hi) {
      for (Index u = lo; u < hi; ++u) {
        const double d_u = du[static_cast<std::size_t>(u)];
        for (Index k = offs[static_cast<std::size_t>(u)];
             k < offs[static_cast<std::size_t>(u) + 1]; ++k) {
          const Index i = items[static_cast<std::size_t>(k)];
          const double d_i = di[static_cast<std::size_t>(i)];
          double dw = d_coef[static_cast<std::size_t>(k)] / std::sqrt(d_u * d_i);
          if (coupled)
            dw -= s_user[static_cast<std::size_t>(u)] / (2.0 * d_u) +
                  s_item[static_cast<std::size_t>(i)] / (2.0 * d_i);
          (*d_weights)[static_cast<std::size_t>(k)] = dw;
        }
      }
    });
  }
  return grad;
}

inline double score(const Mat& z, const BipartiteGraph& g, Index user, Index item) {
  if (user < 0 || user >= g.n_users() || item < 0 || item >= g.n_items())
    throw std::out_of_range("score: index out of range");
  return z.row(user).dot(z.row(item_row(g, item)));
}

/// Dense score vector of user u against every item.
inline Vec score_all_items(const Mat& z, const BipartiteGraph& g, Index user,
                           int threads = 1) {
  if (user < 0 || user >= g.n_users())
    throw std::out_of_range("score_all_items: user out of range");
  Vec out(g.n_items());
  const auto zu = z.row(user);
  parallel_for(g.n_items(), threads, [&](Index lo, Index hi) {
    for (Index i = lo; i < hi; ++i) out[i] = zu.dot(z.row(g.n_users() + i));
  });
  return out;
}

}  // namespace gclrec

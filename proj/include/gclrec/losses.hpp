#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gclrec/dataset.hpp"
#include "gclrec/graph.hpp"
#include "gclrec/lightgcn.hpp"
#include "gclrec/parallel.hpp"
#include "gclrec/params.hpp"

namespace gclrec {

/// Loss value with named components and gradients w.r.t. the embedding
/// inputs. Components are stored unweighted; `total` applies the lambda
/// weights. Gradient matrices are empty when not requested or not
/// applicable.
struct LossReport {
  double total = 0.0;
  std::map<std::string, double> components;
  Mat grad_z1;  // first embedding argument
  Mat grad_z2;  // second embedding argument, when the loss takes two views

  double component(const std::string& name) const {
    const auto it = components.find(name);
    return it == components.end() ? 0.0 : it->second;
  }
};

/// log(1 + exp(-x)) without overflow.
inline double softplus_neg(double x) {
  return x > 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

/// Per-triple BPR losses -log sigmoid(pos - neg) from raw scores.
inline std::vector<double> bpr_pair_losses(const std::vector<double>& pos_scores,
                                           const std::vector<double>& neg_scores) {
  if (pos_scores.size() != neg_scores.size())
    throw std::invalid_argument("bpr_pair_losses: score count mismatch");
  std::vector<double> out(pos_scores.size());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = softplus_neg(pos_scores[k] - neg_scores[k]);
  return out;
}

/// BPR over a batch of (u, i+, i-) triples, averaged over the batch.
/// Gradients land in grad_z1 (same shape as z).
inline LossReport bpr_loss(const TrainBatch& batch, const Mat& z,
                           const BipartiteGraph& g, bool want_grads = true) {
  LossReport report;
  if (want_grads) report.grad_z1 = Mat::Zero(z.rows(), z.cols());
  const double inv_b = batch.size() ? 1.0 / static_cast<double>(batch.size()) : 0.0;
  double loss = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Index u = batch.users[k];
    const Index ip = item_row(g, batch.pos_items[k]);
    const Index in = item_row(g, batch.neg_items[k]);
    const double delta = z.row(u).dot(z.row(ip)) - z.row(u).dot(z.row(in));
    loss += softplus_neg(delta);
    if (want_grads) {
      // d/d(delta) of softplus(-delta) is -sigmoid(-delta).
      const double dd = -sigmoid(-delta) * inv_b;
      report.grad_z1.row(u) += dd * (z.row(ip) - z.row(in));
      report.grad_z1.row(ip) += dd * z.row(u);
      report.grad_z1.row(in) -= dd * z.row(u);
    }
  }
  loss *= inv_b;
  report.components["bpr"] = loss;
  report.total = loss;
  return report;
}

/// Batch InfoNCE with cosine similarity. Anchor i's positive is row i of the
/// other view; the denominator runs over the other view's rows j != i (the
/// positive pair is excluded). Mean over anchors. Gradients flow to both
/// views.
inline LossReport infonce_batch(const Mat& z1, const Mat& z2, double tau,
                                bool want_grads = true, int threads = 1) {
  const Index b = z1.rows();
  if (z2.rows() != b || z2.cols() != z1.cols())
    throw std::invalid_argument("infonce_batch: view shape mismatch");
  if (b < 2) throw std::invalid_argument("infonce_batch: batch size < 2");
  if (tau <= 0.0) throw std::invalid_argument("infonce_batch: tau <= 0");

  Vec norm1(b), norm2(b);
  for (Index i = 0; i < b; ++i) {
    norm1[i] = z1.row(i).norm();
    norm2[i] = z2.row(i).norm();
    if (norm1[i] == 0.0)
      throw std::invalid_argument("infonce_batch: zero-norm row " +
                                  std::to_string(i) + " in view 1");
    if (norm2[i] == 0.0)
      throw std::invalid_argument("infonce_batch: zero-norm row " +
                                  std::to_string(i) + " in view 2");
  }
  Mat n1 = z1.array().colwise() / Eigen::ArrayXd(norm1.array());
  Mat n2 = z2.array().colwise() / Eigen::ArrayXd(norm2.array());

  // cos(i, j) for every anchor/candidate pair.
  Mat cos(b, b);
  parallel_for(b, threads, [&](Index lo, Index hi) {
    cos.middleRows(lo, hi - lo).noalias() =
        n1.middleRows(lo, hi - lo) * n2.transpose();
  });

  // Per-anchor loss; then overwrite `cos` in place with dL/dcos.
  Vec losses(b);
  const double inv_bt = 1.0 / (static_cast<double>(b) * tau);
  parallel_for(b, threads, [&](Index lo, Index hi) {
    for (Index i = lo; i < hi; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Index j = 0; j < b; ++j)
        if (j != i) mx = std::max(mx, cos(i, j));
      double sum = 0.0;
      for (Index j = 0; j < b; ++j)
        if (j != i) sum += std::exp((cos(i, j) - mx) / tau);
      const double lse = mx / tau + std::log(sum);
      losses[i] = -cos(i, i) / tau + lse;
      if (want_grads) {
        for (Index j = 0; j < b; ++j)
          if (j != i) cos(i, j) = std::exp(cos(i, j) / tau - lse) * inv_bt;
        cos(i, i) = -inv_bt;
      }
    }
  });

  LossReport report;
  const double value = losses.sum() / static_cast<double>(b);
  report.components["infonce"] = value;
  report.total = value;
  if (!want_grads) return report;

  Mat dn1(b, z1.cols()), dn2(b, z1.cols());
  parallel_for(b, threads, [&](Index lo, Index hi) {
    dn1.middleRows(lo, hi - lo).noalias() = cos.middleRows(lo, hi - lo) * n2;
  });
  parallel_for(b, threads, [&](Index lo, Index hi) {
    dn2.middleRows(lo, hi - lo).noalias() =
        cos.transpose().middleRows(lo, hi - lo) * n1;
  });
  // Back through the row normalization y = x / |x|.
  report.grad_z1.resize(b, z1.cols());
  report.grad_z2.resize(b, z1.cols());
  for (Index i = 0; i < b; ++i) {
    report.grad_z1.row(i) =
        (dn1.row(i) - n1.row(i).dot(dn1.row(i)) * n1.row(i)) / norm1[i];
    report.grad_z2.row(i) =
        (dn2.row(i) - n2.row(i).dot(dn2.row(i)) * n2.row(i)) / norm2[i];
  }
  return report;
}

inline std::vector<Index> unique_sorted(const std::vector<Index>& v) {
  std::vector<Index> out = v;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline double loss_f_total(double bpr, double nce, double reg, double lambda_ssl) {
  return bpr + lambda_ssl * nce + reg;
}

inline double loss_t_total(double bpr, double nce, double reg, double lambda_t,
                           double lambda_ssl) {
  return bpr - lambda_t * lambda_ssl * nce + reg;
}

struct LossParams {
  double lambda_ssl = 0.1;
  double lambda_reg = 1e-4;
  double lambda_t = 0.2;
  double tau = 0.2;
};

namespace detail {

/// Contrastive term over the batch's unique users and unique positive items,
/// one InfoNCE per side. Gradients scattered into the full-size accumulators
/// scaled by `weight`.
inline std::pair<double, double> batch_infonce(
    const TrainBatch& batch, const Mat& z_g, const Mat& z_t,
    const BipartiteGraph& g, double tau, double weight, Mat* dz_g, Mat* dz_t,
    int threads) {
  if (weight == 0.0) return {0.0, 0.0};  // term dropped from the objective
  const std::vector<Index> users = unique_sorted(batch.users);
  std::vector<Index> item_rows;
  item_rows.reserve(batch.pos_items.size());
  for (const Index i : batch.pos_items) item_rows.push_back(item_row(g, i));
  const std::vector<Index> items = unique_sorted(item_rows);

  double user_part = 0.0, item_part = 0.0;
  const bool want_grads = dz_g != nullptr;
  for (int side = 0; side < 2; ++side) {
    const std::vector<Index>& rows = side == 0 ? users : items;
    if (rows.size() < 2) continue;  // degenerate batch, no contrast possible
    Mat v1(static_cast<Index>(rows.size()), z_g.cols());
    Mat v2(static_cast<Index>(rows.size()), z_g.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      v1.row(static_cast<Index>(r)) = z_g.row(rows[r]);
      v2.row(static_cast<Index>(r)) = z_t.row(rows[r]);
    }
    LossReport nce = infonce_batch(v1, v2, tau, want_grads, threads);
    (side == 0 ? user_part : item_part) = nce.total;
    if (want_grads) {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        dz_g->row(rows[r]) += weight * nce.grad_z1.row(static_cast<Index>(r));
        dz_t->row(rows[r]) += weight * nce.grad_z2.row(static_cast<Index>(r));
      }
    }
  }
  return {user_part, item_part};
}

}  // namespace detail

/// Encoder-side objective: BPR on f(G) + lambda_ssl * InfoNCE(f(G), f(t(G)))
/// + lambda_reg * ||theta_f||^2. Embedding gradients go to grad_z1 (w.r.t.
/// z_g) and grad_z2 (w.r.t. z_t); the regularizer's gradient is accumulated
/// directly into f_params when gradients are requested.
inline LossReport loss_f(const TrainBatch& batch, const Mat& z_g, const Mat& z_t,
                         const BipartiteGraph& g, const LossParams& lp,
                         ParamStore& f_params, bool want_grads = true,
                         int threads = 1) {
  LossReport report = bpr_loss(batch, z_g, g, want_grads);
  if (want_grads) {
    report.grad_z2 = Mat::Zero(z_t.rows(), z_t.cols());
  }
  const auto [nce_u, nce_i] = detail::batch_infonce(
      batch, z_g, z_t, g, lp.tau, lp.lambda_ssl,
      want_grads ? &report.grad_z1 : nullptr,
      want_grads ? &report.grad_z2 : nullptr, threads);

  double reg = 0.0;
  if (want_grads) {
    reg = l2_penalty(f_params, lp.lambda_reg);
  } else {
    for (const ParamTensor& p : f_params.tensors)
      reg += lp.lambda_reg * p.values.squaredNorm();
  }

  report.components["infonce_user"] = nce_u;
  report.components["infonce_item"] = nce_i;
  report.components["reg"] = reg;
  report.total =
      loss_f_total(report.components["bpr"], nce_u + nce_i, reg, lp.lambda_ssl);
  return report;
}

/// Operator-side objective: BPR on f(t(G)) - lambda_t*lambda_ssl *
/// InfoNCE(f(G), f(t(G))) + lambda_reg * ||theta_t||^2. Only the z_t path
/// carries gradient toward t, so grad_z2 is the one to push through the
/// augmented propagation; z_g is a constant here.
inline LossReport loss_t(const TrainBatch& batch, const Mat& z_g, const Mat& z_t,
                         const BipartiteGraph& g, const LossParams& lp,
                         ParamStore& t_params, bool want_grads = true,
                         int threads = 1) {
  LossReport bpr = bpr_loss(batch, z_t, g, want_grads);
  LossReport report;
  report.components["bpr"] = bpr.components["bpr"];
  if (want_grads) {
    report.grad_z2 = std::move(bpr.grad_z1);
    report.grad_z1 = Mat::Zero(z_g.rows(), z_g.cols());  // discarded by t
  }
  const double lambda2 = lp.lambda_t * lp.lambda_ssl;
  const auto [nce_u, nce_i] = detail::batch_infonce(
      batch, z_g, z_t, g, lp.tau, -lambda2,
      want_grads ? &report.grad_z1 : nullptr,
      want_grads ? &report.grad_z2 : nullptr, threads);

  double reg = 0.0;
  if (want_grads) {
    reg = l2_penalty(t_params, lp.lambda_reg);
  } else {
    for (const ParamTensor& p : t_params.tensors)
      reg += lp.lambda_reg * p.values.squaredNorm();
  }

  report.components["infonce_user"] = nce_u;
  report.components["infonce_item"] = nce_i;
  report.components["reg"] = reg;
  report.total = loss_t_total(report.components["bpr"], nce_u + nce_i, reg,
                              lp.lambda_t, lp.lambda_ssl);
  return report;
}

}  // namespace gclrec

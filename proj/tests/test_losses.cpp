#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <set>

#include "gclrec/losses.hpp"
#include "gclrec/rng.hpp"
#include "support/dense_ref.hpp"

using namespace gclrec;

namespace {

struct Fixture {
  std::shared_ptr<const BipartiteGraph> graph;
  NormalizedAdjacency adj;
  TrainBatch batch;
  Index rows() const { return graph->n_users() + graph->n_items(); }
};

Fixture small_fixture(Rng& rng, Index n_users = 4, Index n_items = 5) {
  Fixture f;
  std::vector<EdgePair> edges;
  for (Index u = 0; u < n_users; ++u)
    for (Index i = 0; i < n_items; ++i)
      if (rng.uniform01() < 0.5) edges.push_back({u, i});
  if (edges.empty()) edges.push_back({0, 0});
  f.graph = std::make_shared<const BipartiteGraph>(
      build_graph(edges, n_users, n_items));
  f.adj = normalize(f.graph, 0.0);
  for (int k = 0; k < 8; ++k) {
    const EdgePair& e = edges[rng.below(edges.size())];
    Index neg = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n_items)));
    if (f.graph->user_degree_count(e.user) >= n_items) continue;
    while (f.graph->has_edge(e.user, neg))
      neg = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n_items)));
    f.batch.users.push_back(e.user);
    f.batch.pos_items.push_back(e.item);
    f.batch.neg_items.push_back(neg);
  }
  return f;
}

}  // namespace

TEST_CASE("equal scores give ln 2 per triple") {
  Rng rng(1);
  Fixture f = small_fixture(rng);
  const Mat z = Mat::Zero(f.rows(), 4);  // all scores zero
  const LossReport r = bpr_loss(f.batch, z, *f.graph);
  CHECK(r.components.at("bpr") ==
        Catch::Approx(std::log(2.0)).epsilon(1e-12));
  // Sum form: |batch| * ln 2.
  CHECK(r.components.at("bpr") * static_cast<double>(f.batch.size()) ==
        Catch::Approx(static_cast<double>(f.batch.size()) * std::log(2.0))
            .epsilon(1e-12));
}

TEST_CASE("a 20-point score gap saturates the triple loss") {
  const std::vector<double> pos = {20.0};
  const std::vector<double> neg = {0.0};
  const std::vector<double> losses = bpr_pair_losses(pos, neg);
  CHECK(losses[0] <= 2.1e-9);
  CHECK(losses[0] > 0.0);
}

TEST_CASE("bpr is invariant to a per-user score shift") {
  Rng rng(2);
  std::vector<double> pos, neg;
  for (int k = 0; k < 10; ++k) {
    pos.push_back(rng.uniform(-2, 2));
    neg.push_back(rng.uniform(-2, 2));
  }
  std::vector<double> pos_shift = pos, neg_shift = neg;
  for (int k = 0; k < 10; ++k) {
    const double c = rng.uniform(-5, 5);  // same shift on both sides
    pos_shift[k] += c;
    neg_shift[k] += c;
  }
  const auto a = bpr_pair_losses(pos, neg);
  const auto b = bpr_pair_losses(pos_shift, neg_shift);
  for (int k = 0; k < 10; ++k)
    CHECK(a[k] == Catch::Approx(b[k]).epsilon(1e-12));
}

TEST_CASE("bpr gradients match finite differences") {
  Rng rng(3);
  Fixture f = small_fixture(rng);
  Mat z = dense_ref::random_embeddings(rng, f.rows(), 4);
  const LossReport r = bpr_loss(f.batch, z, *f.graph);

  // Rows the batch never touches carry an exactly-zero gradient.
  std::set<Index> touched;
  for (std::size_t k = 0; k < f.batch.size(); ++k) {
    touched.insert(f.batch.users[k]);
    touched.insert(item_row(*f.graph, f.batch.pos_items[k]));
    touched.insert(item_row(*f.graph, f.batch.neg_items[k]));
  }
  for (Index row = 0; row < f.rows(); ++row)
    if (!touched.count(row)) CHECK(r.grad_z1.row(row).cwiseAbs().maxCoeff() == 0.0);
  const auto loss = [&] { return bpr_loss(f.batch, z, *f.graph, false).total; };
  const FdiffReport rep = finite_diff_check(
      loss, {z.data(), static_cast<std::size_t>(z.size())},
      {r.grad_z1.data(), static_cast<std::size_t>(r.grad_z1.size())}, 1e-5);
  CHECK(rep.max_rel_err <= 1e-5);
}

TEST_CASE("identical views give log(B-1) per anchor") {
  Rng rng(4);
  for (const Index b : {2, 4, 8}) {
    const Mat rows = dense_ref::random_embeddings(rng, 1, 6);
    Mat z(b, 6);
    for (Index r = 0; r < b; ++r) z.row(r) = rows.row(0);
    const LossReport r = infonce_batch(z, z, 0.2, false);
    CHECK(r.total == Catch::Approx(std::log(static_cast<double>(b - 1)))
                         .margin(1e-9));
  }
}

TEST_CASE("two orthogonal anchors with identical positives give -1") {
  Mat z1(2, 2), z2(2, 2);
  z1 << 1, 0, 0, 1;
  z2 = z1;  // positives identical, cross pairs orthogonal
  const LossReport r = infonce_batch(z1, z2, 1.0, false);
  CHECK(r.total == Catch::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("infonce gradients match finite differences on both views") {
  Rng rng(5);
  Mat z1 = dense_ref::random_embeddings(rng, 8, 4);
  Mat z2 = dense_ref::random_embeddings(rng, 8, 4);
  const LossReport r = infonce_batch(z1, z2, 0.2);

  const auto loss = [&] { return infonce_batch(z1, z2, 0.2, false).total; };
  const FdiffReport rep1 = finite_diff_check(
      loss, {z1.data(), static_cast<std::size_t>(z1.size())},
      {r.grad_z1.data(), static_cast<std::size_t>(r.grad_z1.size())}, 1e-5);
  CHECK(rep1.max_rel_err <= 1e-5);
  const FdiffReport rep2 = finite_diff_check(
      loss, {z2.data(), static_cast<std::size_t>(z2.size())},
      {r.grad_z2.data(), static_cast<std::size_t>(r.grad_z2.size())}, 1e-5);
  CHECK(rep2.max_rel_err <= 1e-5);
}

TEST_CASE("infonce mean is invariant under anchor permutation") {
  Rng rng(6);
  const Index b = 6;
  Mat z1 = dense_ref::random_embeddings(rng, b, 4);
  Mat z2 = dense_ref::random_embeddings(rng, b, 4);
  const double base = infonce_batch(z1, z2, 0.3, false).total;
  std::vector<Index> perm = {3, 0, 5, 1, 4, 2};
  Mat p1(b, 4), p2(b, 4);
  for (Index r = 0; r < b; ++r) {
    p1.row(r) = z1.row(perm[static_cast<std::size_t>(r)]);
    p2.row(r) = z2.row(perm[static_cast<std::size_t>(r)]);
  }
  CHECK(infonce_batch(p1, p2, 0.3, false).total ==
        Catch::Approx(base).margin(1e-12));
}

TEST_CASE("infonce is invariant to rescaling a single row") {
  Rng rng(7);
  Mat z1 = dense_ref::random_embeddings(rng, 5, 4);
  Mat z2 = dense_ref::random_embeddings(rng, 5, 4);
  const double base = infonce_batch(z1, z2, 0.2, false).total;
  z1.row(2) *= 3.7;
  z2.row(4) *= 0.02;
  CHECK(infonce_batch(z1, z2, 0.2, false).total ==
        Catch::Approx(base).margin(1e-10));
}

TEST_CASE("infonce names the zero-norm row") {
  Mat z1 = Mat::Ones(3, 2);
  Mat z2 = Mat::Ones(3, 2);
  z2.row(1).setZero();
  CHECK_THROWS_WITH(infonce_batch(z1, z2, 0.2),
                    Catch::Matchers::ContainsSubstring("row 1"));
  CHECK_THROWS(infonce_batch(z1.topRows(1), z2.topRows(1), 0.2));  // B < 2
}

TEST_CASE("loss_f reduces to BPR plus reg when lambda_ssl is zero") {
  Rng rng(8);
  Fixture f = small_fixture(rng);
  const Mat z_g = dense_ref::random_embeddings(rng, f.rows(), 4);
  const Mat z_t = dense_ref::random_embeddings(rng, f.rows(), 4);
  ParamStore params;
  params.tensors.push_back(xavier_init("embeddings", {f.rows(), 4}, rng));

  LossParams lp;
  lp.lambda_ssl = 0.0;
  lp.lambda_reg = 1e-2;
  const LossReport r = loss_f(f.batch, z_g, z_t, *f.graph, lp, params, false);
  const LossReport bpr = bpr_loss(f.batch, z_g, *f.graph, false);
  double reg = 0.0;
  for (const ParamTensor& p : params.tensors)
    reg += lp.lambda_reg * p.values.squaredNorm();
  CHECK(r.total == Catch::Approx(bpr.total + reg).epsilon(1e-12));
}

TEST_CASE("loss_f combines components with lambda_ssl 0.1") {
  CHECK(loss_f_total(2.0, 3.0, 0.5, 0.1) == Catch::Approx(2.8).epsilon(1e-12));
}

TEST_CASE("loss totals equal the weighted component sums") {
  Rng rng(9);
  Fixture f = small_fixture(rng);
  const Mat z_g = dense_ref::random_embeddings(rng, f.rows(), 4);
  const Mat z_t = dense_ref::random_embeddings(rng, f.rows(), 4);
  ParamStore params;
  params.tensors.push_back(xavier_init("embeddings", {f.rows(), 4}, rng));
  LossParams lp;  // defaults

  const LossReport rf = loss_f(f.batch, z_g, z_t, *f.graph, lp, params, false);
  CHECK(rf.total ==
        Catch::Approx(rf.component("bpr") +
                      lp.lambda_ssl * (rf.component("infonce_user") +
                                       rf.component("infonce_item")) +
                      rf.component("reg"))
            .margin(1e-12));

  ParamStore t_params;
  t_params.tensors.push_back(xavier_init("mlp.w1", {5, 4}, rng));
  const LossReport rt = loss_t(f.batch, z_g, z_t, *f.graph, lp, t_params, false);
  CHECK(rt.total ==
        Catch::Approx(rt.component("bpr") -
                      lp.lambda_t * lp.lambda_ssl *
                          (rt.component("infonce_user") +
                           rt.component("infonce_item")) +
                      rt.component("reg"))
            .margin(1e-12));
}

TEST_CASE("loss_t drops the contrastive term at lambda_t zero") {
  Rng rng(10);
  Fixture f = small_fixture(rng);
  const Mat z_g = dense_ref::random_embeddings(rng, f.rows(), 4);
  const Mat z_t = dense_ref::random_embeddings(rng, f.rows(), 4);
  ParamStore t_params;
  t_params.tensors.push_back(xavier_init("mlp.w1", {5, 4}, rng));
  LossParams lp;
  lp.lambda_t = 0.0;
  const LossReport r = loss_t(f.batch, z_g, z_t, *f.graph, lp, t_params, false);
  const LossReport bpr = bpr_loss(f.batch, z_t, *f.graph, false);
  double reg = 0.0;
  for (const ParamTensor& p : t_params.tensors)
    reg += lp.lambda_reg * p.values.squaredNorm();
  CHECK(r.total == Catch::Approx(bpr.total + reg).epsilon(1e-12));
}

TEST_CASE("more view agreement raises loss_t's contrastive contribution") {
  Rng rng(11);
  Fixture f = small_fixture(rng);
  const Mat z_g = dense_ref::random_embeddings(rng, f.rows(), 4);
  ParamStore t_params;
  t_params.tensors.push_back(xavier_init("mlp.w1", {5, 4}, rng));
  LossParams lp;  // lambda_t 0.2 > 0

  const Mat far = dense_ref::random_embeddings(rng, f.rows(), 4);
  const Mat near = z_g + 0.01 * dense_ref::random_embeddings(rng, f.rows(), 4);

  const LossReport r_far = loss_t(f.batch, z_g, far, *f.graph, lp, t_params, false);
  const LossReport r_near = loss_t(f.batch, z_g, near, *f.graph, lp, t_params, false);
  const double contrib_far = -lp.lambda_t * lp.lambda_ssl *
                             (r_far.component("infonce_user") +
                              r_far.component("infonce_item"));
  const double contrib_near = -lp.lambda_t * lp.lambda_ssl *
                              (r_near.component("infonce_user") +
                               r_near.component("infonce_item"));
  CHECK(contrib_near > contrib_far);
}

TEST_CASE("loss_f end-to-end gradient over Z0 matches finite differences") {
  Rng rng(12);
  Fixture f = small_fixture(rng);
  Mat z0 = dense_ref::random_embeddings(rng, f.rows(), 3);

  // Fixed weighted second adjacency standing in for t(G).
  std::vector<double> w;
  const std::vector<EdgePair> cand_edges = f.graph->edge_list();
  for (std::size_t k = 0; k < cand_edges.size(); ++k)
    w.push_back(rng.uniform(0.2, 1.0));
  const auto aug_graph = std::make_shared<const BipartiteGraph>(
      BipartiteGraph::build(cand_edges, f.graph->n_users(), f.graph->n_items(), &w));
  const NormalizedAdjacency aug = normalize(aug_graph, 1e-8);

  LossParams lp;
  const Index layers = 2;

  ParamStore params;
  params.add("embeddings", {f.rows(), 3});
  params.tensors[0].values = Eigen::Map<const Vec>(z0.data(), z0.size());

  const auto eval = [&](bool want_grads, Mat* dz0_out) {
    const Mat z0_cur = Eigen::Map<const Mat>(params.tensors[0].values.data(),
                                             f.rows(), 3);
    PropagationTape tape_g, tape_t;
    const Mat z_g = propagate(f.adj, z0_cur, layers, want_grads ? &tape_g : nullptr);
    const Mat z_t = propagate(aug, z0_cur, layers, want_grads ? &tape_t : nullptr);
    params.zero_grad();
    const LossReport r =
        loss_f(f.batch, z_g, z_t, *f.graph, lp, params, want_grads);
    if (want_grads) {
      Mat dz0 = propagate_backward(tape_g, r.grad_z1);
      dz0 += propagate_backward(tape_t, r.grad_z2);
      dz0 += Eigen::Map<const Mat>(params.tensors[0].grad.data(), f.rows(), 3);
      *dz0_out = dz0;
    }
    return r.total;
  };

  Mat analytic;
  eval(true, &analytic);
  const auto value = [&] { return eval(false, nullptr); };
  const FdiffReport rep = finite_diff_check(
      value, {params.tensors[0].values.data(),
              static_cast<std::size_t>(params.tensors[0].values.size())},
      {analytic.data(), static_cast<std::size_t>(analytic.size())}, 1e-5);
  CHECK(rep.max_rel_err <= 1e-4);
}

TEST_CASE("one small exact gradient step decreases loss_f") {
  Rng rng(13);
  Fixture f = small_fixture(rng);
  Mat z0 = dense_ref::random_embeddings(rng, f.rows(), 3);
  LossParams lp;
  const Index layers = 1;

  ParamStore params;
  params.add("embeddings", {f.rows(), 3});
  params.tensors[0].values = Eigen::Map<const Vec>(z0.data(), z0.size());

  const auto eval = [&](bool grads, Mat* out) {
    const Mat cur = Eigen::Map<const Mat>(params.tensors[0].values.data(),
                                          f.rows(), 3);
    PropagationTape tg, tt;
    const Mat z_g = propagate(f.adj, cur, layers, grads ? &tg : nullptr);
    params.zero_grad();
    const LossReport r = loss_f(f.batch, z_g, z_g, *f.graph, lp, params, grads);
    if (grads) {
      Mat d = propagate_backward(tg, r.grad_z1 + r.grad_z2);
      d += Eigen::Map<const Mat>(params.tensors[0].grad.data(), f.rows(), 3);
      *out = d;
    }
    return r.total;
  };

  Mat grad;
  const double before = eval(true, &grad);
  double lr = 1e-4;
  for (int tries = 0; tries < 8; ++tries) {
    Vec saved = params.tensors[0].values;
    params.tensors[0].values -= lr * Eigen::Map<const Vec>(grad.data(), grad.size());
    const double after = eval(false, nullptr);
    if (after < before) {
      SUCCEED();
      return;
    }
    params.tensors[0].values = saved;
    lr *= 0.5;  // backtrack
  }
  FAIL("no descent after backtracking");
}

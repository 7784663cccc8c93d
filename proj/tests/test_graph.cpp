#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <memory>

#include "gclrec/graph.hpp"
#include "gclrec/rng.hpp"
#include "support/dense_ref.hpp"

using namespace gclrec;

namespace {

std::shared_ptr<const BipartiteGraph> toy_graph() {
  // {(u0,i0),(u0,i1),(u1,i1)} over 2x2
  return std::make_shared<const BipartiteGraph>(
      build_graph({{0, 0}, {0, 1}, {1, 1}}, 2, 2));
}

}  // namespace

TEST_CASE("build_graph computes degrees on the toy graph") {
  const auto g = toy_graph();
  CHECK(g->n_edges() == 3);
  CHECK(g->user_degree(0) == 2.0);
  CHECK(g->user_degree(1) == 1.0);
  CHECK(g->item_degree(0) == 1.0);
  CHECK(g->item_degree(1) == 2.0);
  CHECK_FALSE(g->weighted());
}

TEST_CASE("build_graph drops duplicate pairs") {
  const BipartiteGraph g = build_graph({{0, 0}, {0, 0}}, 1, 1);
  CHECK(g.n_edges() == 1);
  CHECK(g.user_degree(0) == 1.0);
}

TEST_CASE("build_graph rejects out-of-range records by index") {
  CHECK_THROWS_WITH(build_graph({{0, 0}, {5, 1}}, 2, 2),
                    Catch::Matchers::ContainsSubstring("record 1"));
  CHECK_THROWS_WITH(build_graph({{0, 7}}, 2, 2),
                    Catch::Matchers::ContainsSubstring("item=7"));
}

TEST_CASE("build_graph matches a set-based reference on random input") {
  Rng rng(20240801);
  std::vector<EdgePair> pairs;
  for (int k = 0; k < 1000; ++k)
    pairs.push_back({static_cast<Index>(rng.below(50)),
                     static_cast<Index>(rng.below(50))});
  const BipartiteGraph g = build_graph(pairs, 50, 50);
  const dense_ref::SetGraph ref = dense_ref::set_graph(50, 50, pairs);

  CHECK(g.n_edges() == static_cast<Index>(ref.edges.size()));
  for (Index u = 0; u < 50; ++u)
    CHECK(g.user_degree_count(u) == ref.user_degree[static_cast<std::size_t>(u)]);

  // CSR offsets monotone, neighbor rows sorted, both directions agree.
  for (Index u = 0; u < 50; ++u) {
    CHECK(g.user_offsets()[u] <= g.user_offsets()[u + 1]);
    for (Index k = g.user_offsets()[u] + 1; k < g.user_offsets()[u + 1]; ++k)
      CHECK(g.user_items()[k - 1] < g.user_items()[k]);
  }
  for (const auto& [u, i] : ref.edges) CHECK(g.has_edge(u, i));
}

TEST_CASE("build_graph is deterministic") {
  Rng rng(7);
  std::vector<EdgePair> pairs;
  for (int k = 0; k < 300; ++k)
    pairs.push_back({static_cast<Index>(rng.below(20)),
                     static_cast<Index>(rng.below(20))});
  const BipartiteGraph a = build_graph(pairs, 20, 20);
  const BipartiteGraph b = build_graph(pairs, 20, 20);
  CHECK(a.user_offsets() == b.user_offsets());
  CHECK(a.user_items() == b.user_items());
  CHECK(a.item_users() == b.item_users());
  CHECK(a.item_edge_ids() == b.item_edge_ids());
}

TEST_CASE("normalize reproduces the toy coefficients") {
  const auto g = toy_graph();
  const NormalizedAdjacency adj = normalize(g, 0.0);
  // Canonical edge order: (0,0), (0,1), (1,1).
  CHECK(adj.coefficient(0) == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(adj.coefficient(1) == Catch::Approx(0.5).epsilon(1e-12));
  CHECK(adj.coefficient(2) == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("normalize of a single binary edge gives 1") {
  const auto g = std::make_shared<const BipartiteGraph>(build_graph({{0, 0}}, 1, 1));
  CHECK(normalize(g, 0.0).coefficient(0) == 1.0);
}

TEST_CASE("normalize handles uniform weights 0.5") {
  const std::vector<EdgePair> edges = {{0, 0}, {0, 1}, {1, 1}};
  const std::vector<double> w = {0.5, 0.5, 0.5};
  const auto g = std::make_shared<const BipartiteGraph>(
      BipartiteGraph::build(edges, 2, 2, &w));
  const NormalizedAdjacency adj = normalize(g, 0.0);
  // c(u0,i0) = 0.5 / sqrt(1.0 * 0.5)
  CHECK(adj.coefficient(0) ==
        Catch::Approx(0.5 / std::sqrt(0.5)).epsilon(1e-12));
  // Default epsilon for weighted graphs barely perturbs it.
  const NormalizedAdjacency adj_eps = normalize(g);
  CHECK(adj_eps.epsilon() == 1e-8);
  CHECK(adj_eps.coefficient(0) == Catch::Approx(0.70711).margin(1e-5));
}

TEST_CASE("normalize matches the dense oracle on random graphs") {
  Rng rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const bool weighted = trial % 2 == 1;
    const dense_ref::RandomGraph rg =
        dense_ref::random_graph(rng, 16, 16, 60, weighted);
    const auto g = std::make_shared<const BipartiteGraph>(BipartiteGraph::build(
        rg.edges, rg.n_users, rg.n_items, weighted ? &rg.weights : nullptr));
    const double eps = weighted ? 1e-8 : 0.0;
    const NormalizedAdjacency adj = normalize(g, eps);

    const Eigen::MatrixXd a = dense_ref::adjacency(
        rg.n_users, rg.n_items, rg.edges, weighted ? &rg.weights : nullptr);
    const Eigen::MatrixXd a_hat = dense_ref::normalized(a, eps);

    const auto& offs = g->user_offsets();
    const auto& items = g->user_items();
    for (Index u = 0; u < rg.n_users; ++u)
      for (Index k = offs[u]; k < offs[u + 1]; ++k)
        CHECK(std::abs(adj.coefficient(k) -
                       a_hat(u, rg.n_users + items[k])) <= 1e-12);
  }
}

TEST_CASE("normalize keeps the two CSR directions bitwise consistent") {
  Rng rng(3);
  const dense_ref::RandomGraph rg = dense_ref::random_graph(rng, 12, 12, 50, true);
  const auto g = std::make_shared<const BipartiteGraph>(
      BipartiteGraph::build(rg.edges, rg.n_users, rg.n_items, &rg.weights));
  const NormalizedAdjacency adj = normalize(g);
  // Walk the item->user direction and compare against the canonical store.
  const auto& offs = g->item_offsets();
  const auto& ids = g->item_edge_ids();
  for (Index i = 0; i < rg.n_items; ++i)
    for (Index k = offs[i]; k < offs[i + 1]; ++k) {
      const double via_item = adj.coefficient(ids[k]);
      const double via_user = adj.coefficients()[ids[k]];
      CHECK(std::memcmp(&via_item, &via_user, sizeof(double)) == 0);
    }
}

TEST_CASE("count-degree normalization divides by incident counts") {
  const std::vector<EdgePair> edges = {{0, 0}, {0, 1}, {1, 1}};
  const std::vector<double> w = {0.5, 0.5, 0.5};
  const auto g = std::make_shared<const BipartiteGraph>(
      BipartiteGraph::build(edges, 2, 2, &w));
  const NormalizedAdjacency adj = normalize_with_count_degrees(g, 0.0);
  CHECK_FALSE(adj.degrees_track_weights());
  // c(u0,i0) = 0.5 / sqrt(2 * 1)
  CHECK(adj.coefficient(0) == Catch::Approx(0.5 / std::sqrt(2.0)).epsilon(1e-12));
}

#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "../support/metrics_oracle.hpp"
#include "dynembed/errors.hpp"
#include "dynembed/metrics.hpp"
#include "dynembed/random.hpp"

using namespace dynembed;
using namespace dynembed::metrics;

namespace {

// Candidates a=1, b=2, c=3 of node 0, ranked a, b, c.
Matrix abc_scores() {
  Matrix s = Matrix::Zero(4, 4);
  s(0, 1) = 0.9;
  s(0, 2) = 0.5;
  s(0, 3) = 0.1;
  return s;
}

NeighborMask mask_of(int n, std::initializer_list<int> ids) {
  NeighborMask m(n, 0);
  for (int v : ids) m[v] = 1;
  return m;
}

Matrix random_scores(int n, Rng& rng, bool coarse) {
  Matrix s(n, n);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    // Coarse scores produce many ties.
    s.data()[i] = coarse ? static_cast<double>(rng.below(4)) : rng.uniform(-1, 1);
  }
  return s;
}

std::vector<NeighborMask> random_gt(int n, double p, Rng& rng) {
  std::vector<NeighborMask> gt(n, NeighborMask(n, 0));
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      if (u != v && rng.bernoulli(p)) gt[u][v] = 1;
    }
  }
  return gt;
}

std::vector<int> all_nodes(int n) {
  std::vector<int> v(n);
  for (int i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

TEST_CASE("rank_candidates") {
  const NodeRanking r = rank_candidates(abc_scores(), 0);
  REQUIRE(r.candidates.size() == 3);
  CHECK(r.candidates[0].first == 1);
  CHECK(r.candidates[1].first == 2);
  CHECK(r.candidates[2].first == 3);

  SUBCASE("ties are broken by ascending id") {
    Matrix s = Matrix::Constant(5, 5, 0.3);
    const NodeRanking t = rank_candidates(s, 2);
    CHECK(t.candidates[0].first == 0);
    CHECK(t.candidates[1].first == 1);
    CHECK(t.candidates[2].first == 3);
    CHECK(t.candidates[3].first == 4);
  }
  SUBCASE("k_max truncates to the best candidates") {
    const NodeRanking t = rank_candidates(abc_scores(), 0, 2);
    REQUIRE(t.candidates.size() == 2);
    CHECK(t.candidates[1].first == 2);
  }
  SUBCASE("errors") {
    Matrix bad = abc_scores();
    bad(0, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(rank_candidates(bad, 0), std::domain_error);
    CHECK_THROWS_AS(rank_candidates(Matrix::Zero(2, 3), 0), DimensionError);
    CHECK_THROWS_AS(rank_candidates(abc_scores(), 4), std::out_of_range);
  }
}

TEST_CASE("precision_at_k hand examples") {
  const NodeRanking r = rank_candidates(abc_scores(), 0);
  const NeighborMask gt = mask_of(4, {1, 3});
  CHECK(precision_at_k(r, gt, 1) == 1.0);
  CHECK(precision_at_k(r, gt, 2) == 0.5);
  CHECK(precision_at_k(r, gt, 3) == doctest::Approx(2.0 / 3.0));
  // Past the candidate list the divisor stays k.
  CHECK(precision_at_k(r, gt, 4) == 0.5);
  for (int k = 1; k <= 3; ++k) {
    CHECK(precision_at_k(r, mask_of(4, {}), k) == 0.0);
    CHECK(precision_at_k(r, mask_of(4, {1, 2, 3}), k) == 1.0);
  }
  CHECK_THROWS_AS(precision_at_k(r, gt, 0), ArgumentError);
}

TEST_CASE("average_precision hand examples") {
  const NodeRanking r = rank_candidates(abc_scores(), 0);
  CHECK(average_precision(r, mask_of(4, {1, 3})) == doctest::Approx(5.0 / 6.0));
  CHECK(average_precision(r, mask_of(4, {1, 2})) == 1.0);
  CHECK(average_precision(r, mask_of(4, {3})) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(average_precision(r, mask_of(4, {})), ArgumentError);

  SUBCASE("single true edge ranked last of m") {
    for (int m = 1; m <= 12; ++m) {
      Matrix s = Matrix::Zero(m + 1, m + 1);
      for (int v = 1; v <= m; ++v) s(0, v) = m - v;  // node m is last
      CHECK(average_precision(rank_candidates(s, 0), mask_of(m + 1, {m})) == doctest::Approx(1.0 / m));
    }
  }
}

TEST_CASE("map_score examples") {
  SUBCASE("perfect predictor") {
    Rng rng(1);
    auto gt = random_gt(10, 0.3, rng);
    Matrix s = Matrix::Zero(10, 10);
    for (int u = 0; u < 10; ++u) {
      for (int v = 0; v < 10; ++v) s(u, v) = gt[u][v];
    }
    CHECK(map_score(s, gt, all_nodes(10)).map == 1.0);
  }
  SUBCASE("antiperfect scores with one edge among five candidates") {
    // Six nodes paired 0-1, 2-3, 4-5; each node's partner scores lowest.
    const int n = 6;
    std::vector<graph::Edge> edges{{0, 1}, {2, 3}, {4, 5}};
    graph::Snapshot snap(n, edges, false);
    Matrix s = Matrix::Constant(n, n, 1.0);
    for (const auto& e : edges) s(e.u, e.v) = s(e.v, e.u) = 0.0;
    const MapResult m = map_score(s, snap, all_nodes(n));
    CHECK(m.map == doctest::Approx(0.2));
    CHECK(m.node_ap.size() == 6);
  }
  SUBCASE("nodes without ground truth are excluded") {
    graph::Snapshot snap(4, {{0, 1}}, false);
    Matrix s = Matrix::Zero(4, 4);
    s(0, 1) = s(1, 0) = 1.0;
    const MapResult m = map_score(s, snap, all_nodes(4));
    CHECK(m.map == 1.0);
    CHECK(m.excluded == 2);
    CHECK(m.node_ap.size() == 2);
  }
  SUBCASE("empty evaluation") {
    graph::Snapshot snap(3, {}, false);
    CHECK_THROWS_AS(map_score(Matrix::Zero(3, 3), snap, all_nodes(3)), ArgumentError);
  }
  SUBCASE("new-link ground truth drops existing edges") {
    graph::Snapshot prev(4, {{0, 1}}, false), next(4, {{0, 1}, {0, 2}}, false);
    const auto masks = ground_truth(next, &prev);
    CHECK(masks[0][1] == 0);
    CHECK(masks[0][2] == 1);
    CHECK(masks[2][0] == 1);
  }
}

TEST_CASE("map_score equals the brute-force oracle") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(14));
    const Matrix s = random_scores(n, rng, trial % 2 == 0);
    const auto gt = random_gt(n, rng.uniform(0.05, 0.6), rng);
    const auto nodes = all_nodes(n);
    const auto expected = oracle::map_score(s, gt, nodes);
    CAPTURE(trial);
    if (expected.included == 0) {
      CHECK_THROWS_AS(map_score(s, gt, nodes), ArgumentError);
      continue;
    }
    const MapResult got = map_score(s, gt, nodes);
    CHECK(got.map == expected.map);
    CHECK(static_cast<int>(got.node_ap.size()) == expected.included);
    for (const auto& [u, ap] : got.node_ap) CHECK(ap == oracle::average_precision(s, gt[u], u));
    for (int u = 0; u < n; ++u) {
      const NodeRanking r = rank_candidates(s, u);
      for (int k = 1; k <= n + 1; ++k) CHECK(precision_at_k(r, gt[u], k) == oracle::precision_at_k(s, gt[u], u, k));
    }
  }
}

TEST_CASE("map_score is invariant under strictly increasing maps") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 12;
    const Matrix s = random_scores(n, rng, trial % 3 == 0);
    const auto gt = random_gt(n, 0.3, rng);
    const auto nodes = all_nodes(n);
    const double base = map_score(s, gt, nodes).map;
    const Matrix affine = (2.0 * s.array() + 1.0).matrix();
    const Matrix squashed = s.array().tanh().matrix();
    CHECK(map_score(affine, gt, nodes).map == base);
    CHECK(map_score(squashed, gt, nodes).map == base);
  }
}

TEST_CASE("map_score value ranges and P@k shape") {
  Rng rng(9);
  const int n = 15;
  const Matrix s = random_scores(n, rng, false);
  const auto gt = random_gt(n, 0.3, rng);
  const MapResult m = map_score(s, gt, all_nodes(n));
  CHECK(m.map >= 0.0);
  CHECK(m.map <= 1.0);
  for (double p : m.precision) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  for (const auto& [u, ap] : m.node_ap) {
    const NodeRanking r = rank_candidates(s, u);
    int last_hit = 0;
    for (std::size_t i = 0; i < r.candidates.size(); ++i) {
      if (gt[u][r.candidates[i].first]) last_hit = static_cast<int>(i) + 1;
    }
    for (int k = last_hit; k < n; ++k) CHECK(precision_at_k(r, gt[u], k + 1) <= precision_at_k(r, gt[u], std::max(k, 1)));
  }
}

TEST_CASE("evaluate_method") {
  std::vector<graph::Snapshot> steps(4, graph::Snapshot(6, {{0, 1}, {1, 2}, {3, 4}, {4, 5}}, false));
  graph::DynamicGraph g(steps);
  const Matrix scores = materialize_adjacency(steps[0]);
  const auto nodes = all_nodes(6);
  int calls = 0;
  auto constant = [&](int) {
    ++calls;
    return scores;
  };
  const EvalReport single = evaluate_method(constant, g, 2, 3, nodes);
  REQUIRE(single.steps.size() == 1);
  CHECK(single.mean_map == single.steps[0].map);

  const EvalReport all = evaluate_method(constant, g, 1, 4, nodes);
  REQUIRE(all.steps.size() == 3);
  CHECK(all.steps[0].map == all.steps[1].map);
  CHECK(all.steps[1].map == all.steps[2].map);
  CHECK(all.steps[0].target == 1);
  CHECK(calls == 4);

  EvalOptions new_links;
  new_links.new_links_only = true;
  // Nothing new appears in a constant graph.
  CHECK_THROWS_AS(evaluate_method(constant, g, 1, 2, nodes, new_links), ArgumentError);
  CHECK_THROWS_AS(evaluate_method(constant, g, 3, 3, nodes), ArgumentError);
  CHECK_THROWS_AS(evaluate_method(constant, g, 0, 5, nodes), ArgumentError);
}

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dynembed/graph.hpp"
#include "dynembed/linalg.hpp"

namespace dynembed::metrics {

inline constexpr std::array<int, 8> kPrecisionKs{2, 10, 100, 200, 300, 500, 800, 1000};

// Candidates of one node ordered by descending score; equal scores are
// ordered by ascending node id.
struct NodeRanking {
  int node = 0;
  std::vector<std::pair<int, double>> candidates;
};

// Ranks every other node by row `node` of the score matrix. With k_max > 0
// only the first k_max candidates are kept.
NodeRanking rank_candidates(const Matrix& scores, int node, std::size_t k_max = 0);

// Ground-truth neighbors as a membership mask over node ids.
using NeighborMask = std::vector<char>;

// |top-k ∩ gt| / k. When k exceeds the candidate count the available
// candidates are used and the divisor stays k.
double precision_at_k(const NodeRanking& ranking, const NeighborMask& gt, int k);

// Mean of P@k over the ranks k holding a true neighbor. Throws ArgumentError
// when no candidate is a true neighbor.
double average_precision(const NodeRanking& ranking, const NeighborMask& gt);

struct MapResult {
  double map = 0.0;
  std::vector<std::pair<int, double>> node_ap;  // (node, AP) for included nodes
  int excluded = 0;  // nodes without ground-truth edges
  // Mean P@k over included nodes, aligned with kPrecisionKs.
  std::array<double, kPrecisionKs.size()> precision{};
};

// Neighbor masks per node from a snapshot. With `exclude`, edges already
// present there are dropped (new-link evaluation).
std::vector<NeighborMask> ground_truth(const graph::Snapshot& gt, const graph::Snapshot* exclude = nullptr);

// MAP of the score rows of `nodes` against the ground truth. Throws
// ArgumentError when no node has a ground-truth edge and std::domain_error on
// non-finite scores.
MapResult map_score(const Matrix& scores, std::span<const std::vector<char>> gt, std::span<const int> nodes);
MapResult map_score(const Matrix& scores, const graph::Snapshot& gt, std::span<const int> nodes);

struct StepResult {
  int target = 0;
  double map = 0.0;
  int included = 0;
  int excluded = 0;
  std::array<double, kPrecisionKs.size()> precision{};
};

struct EvalReport {
  std::string method;
  int embed_dim = 0;
  int lookback = 0;
  std::uint64_t seed = 0;
  std::vector<StepResult> steps;
  double mean_map = 0.0;
};

// Supplies the score matrix for a target step.
using Predictor = std::function<Matrix(int target)>;

struct EvalOptions {
  // Count only edges absent from the snapshot preceding the target.
  bool new_links_only = false;
};

// Scores each target step in [t_lo, t_hi) against g's snapshot at that step.
// The predictor is called before the target snapshot is read.
EvalReport evaluate_method(const Predictor& predictor, const graph::DynamicGraph& g, int t_lo, int t_hi,
                           std::span<const int> nodes, const EvalOptions& options = {});

}  // namespace dynembed::metrics

#include "dynembed/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dynembed/errors.hpp"

namespace dynembed::metrics {

NodeRanking rank_candidates(const Matrix& scores, int node, std::size_t k_max) {
  if (scores.rows() != scores.cols()) {
    throw DimensionError("score matrix must be square, got " + std::to_string(scores.rows()) + "x" +
                         std::to_string(scores.cols()));
  }
  if (node < 0 || node >= scores.rows()) throw std::out_of_range("node " + std::to_string(node));
  NodeRanking r{node, {}};
  r.candidates.reserve(static_cast<std::size_t>(scores.cols()));
  for (int v = 0; v < scores.cols(); ++v) {
    if (v == node) continue;
    const double s = scores(node, v);
    if (!std::isfinite(s)) throw std::domain_error("non-finite score at row " + std::to_string(node));
    r.candidates.emplace_back(v, s);
  }
  auto before = [](const std::pair<int, double>& a, const std::pair<int, double>& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  };
  if (k_max > 0 && k_max < r.candidates.size()) {
    std::partial_sort(r.candidates.begin(), r.candidates.begin() + static_cast<std::ptrdiff_t>(k_max),
                      r.candidates.end(), before);
    r.candidates.resize(k_max);
  } else {
    std::sort(r.candidates.begin(), r.candidates.end(), before);
  }
  return r;
}

double precision_at_k(const NodeRanking& ranking, const NeighborMask& gt, int k) {
  if (k < 1) throw ArgumentError("k must be at least 1");
  const std::size_t limit = std::min<std::size_t>(static_cast<std::size_t>(k), ranking.candidates.size());
  int hits = 0;
  for (std::size_t i = 0; i < limit; ++i) hits += gt[ranking.candidates[i].first] != 0;
  return static_cast<double>(hits) / k;
}

double average_precision(const NodeRanking& ranking, const NeighborMask& gt) {
  double sum = 0.0;
  int hits = 0;
  for (std::size_t i = 0; i < ranking.candidates.size(); ++i) {
    if (gt[ranking.candidates[i].first]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  if (hits == 0) throw ArgumentError("average precision of node " + std::to_string(ranking.node) +
                                     " is undefined without ground-truth edges");
  return sum / hits;
}

std::vector<NeighborMask> ground_truth(const graph::Snapshot& gt, const graph::Snapshot* exclude) {
  const int n = gt.num_nodes();
  std::vector<NeighborMask> masks(n, NeighborMask(n, 0));
  for (const auto& e : gt.edges()) {
    masks[e.u][e.v] = 1;
    if (!gt.directed()) masks[e.v][e.u] = 1;
  }
  if (exclude) {
    if (exclude->num_nodes() != n) throw DimensionError("snapshots differ in node count");
    for (const auto& e : exclude->edges()) {
      masks[e.u][e.v] = 0;
      if (!exclude->directed()) masks[e.v][e.u] = 0;
    }
  }
  return masks;
}

MapResult map_score(const Matrix& scores, std::span<const std::vector<char>> gt, std::span<const int> nodes) {
  if (static_cast<Eigen::Index>(gt.size()) != scores.rows()) {
    throw DimensionError("ground truth has " + std::to_string(gt.size()) + " nodes, scores have " +
                         std::to_string(scores.rows()));
  }
  MapResult result;
  for (int u : nodes) {
    const NeighborMask& mask = gt[u];
    bool any = false;
    for (std::size_t v = 0; v < mask.size() && !any; ++v) any = mask[v] && static_cast<int>(v) != u;
    if (!any) {
      ++result.excluded;
      continue;
    }
    NodeRanking r = rank_candidates(scores, u);
    result.node_ap.emplace_back(u, average_precision(r, mask));
    for (std::size_t i = 0; i < kPrecisionKs.size(); ++i) result.precision[i] += precision_at_k(r, mask, kPrecisionKs[i]);
  }
  if (result.node_ap.empty()) throw ArgumentError("empty evaluation: no node has ground-truth edges");
  double total = 0.0;
  for (const auto& [u, ap] : result.node_ap) total += ap;
  const auto count = static_cast<double>(result.node_ap.size());
  result.map = total / count;
  for (double& p : result.precision) p /= count;
  return result;
}

MapResult map_score(const Matrix& scores, const graph::Snapshot& gt, std::span<const int> nodes) {
  auto masks = ground_truth(gt);
  return map_score(scores, masks, nodes);
}

EvalReport evaluate_method(const Predictor& predictor, const graph::DynamicGraph& g, int t_lo, int t_hi,
                           std::span<const int> nodes, const EvalOptions& options) {
  if (t_lo < 0 || t_hi > g.num_steps() || t_lo >= t_hi) {
    throw ArgumentError("evaluation range [" + std::to_string(t_lo) + ", " + std::to_string(t_hi) +
                        ") is empty or outside the graph");
  }
  if (options.new_links_only && t_lo < 1) throw ArgumentError("new-link evaluation needs a previous step");
  EvalReport report;
  for (int t = t_lo; t < t_hi; ++t) {
    const Matrix scores = predictor(t);
    const auto masks = ground_truth(g.snapshot(t), options.new_links_only ? &g.snapshot(t - 1) : nullptr);
    MapResult m = map_score(scores, masks, nodes);
    report.steps.push_back({t, m.map, static_cast<int>(m.node_ap.size()), m.excluded, m.precision});
  }
  double total = 0.0;
  for (const auto& s : report.steps) total += s.map;
  report.mean_map = total / static_cast<double>(report.steps.size());
  return report;
}

}  // namespace dynembed::metrics

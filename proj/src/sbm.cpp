#include "dynembed/sbm.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "dynembed/errors.hpp"

namespace dynembed::sbm {

namespace {

// Community 1 loses members in both scenarios.
constexpr int kSourceCommunity = 1;

// Symmetric 0/1 adjacency over a small dense byte matrix. SBM graphs here are
// at most a few thousand nodes, so n^2 bytes is cheap and keeps edits O(1).
class EdgeSet {
 public:
  explicit EdgeSet(int n) : n_(n), bits_(static_cast<std::size_t>(n) * n, 0) {}

  explicit EdgeSet(const graph::Snapshot& s) : EdgeSet(s.num_nodes()) {
    for (const graph::Edge& e : s.edges()) set(e.u, e.v, true);
  }

  bool has(int u, int v) const { return bits_[index(u, v)] != 0; }

  void set(int u, int v, bool present) {
    bits_[index(u, v)] = present;
    bits_[index(v, u)] = present;
  }

  graph::Snapshot to_snapshot() const {
    std::vector<graph::Edge> edges;
    for (int u = 0; u < n_; ++u) {
      for (int v = u + 1; v < n_; ++v) {
        if (has(u, v)) edges.push_back({u, v, 1.0});
      }
    }
    return graph::Snapshot(n_, std::move(edges), false);
  }

 private:
  std::size_t index(int u, int v) const { return static_cast<std::size_t>(u) * n_ + v; }

  int n_;
  std::vector<char> bits_;
};

std::vector<int> block_labels(std::span<const int> block_sizes) {
  std::vector<int> labels;
  for (std::size_t b = 0; b < block_sizes.size(); ++b) {
    labels.insert(labels.end(), block_sizes[b], static_cast<int>(b));
  }
  return labels;
}

StaticSbm generate_static(std::span<const int> block_sizes, double p_in, double p_cross,
                          Rng& rng) {
  std::vector<int> labels = block_labels(block_sizes);
  const int n = static_cast<int>(labels.size());
  std::vector<graph::Edge> edges;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (rng.bernoulli(labels[u] == labels[v] ? p_in : p_cross)) edges.push_back({u, v, 1.0});
    }
  }
  return {graph::Snapshot(n, std::move(edges), false), std::move(labels)};
}

std::vector<int> members_of(std::span<const int> labels, int community) {
  std::vector<int> out;
  for (int v = 0; v < static_cast<int>(labels.size()); ++v) {
    if (labels[v] == community) out.push_back(v);
  }
  return out;
}

}  // namespace

void SbmConfig::validate() const {
  if (block_sizes.size() < 2) throw ArgumentError("SBM needs at least two blocks");
  for (int b : block_sizes) {
    if (b < 1) throw ArgumentError("block sizes must be positive");
  }
  if (!(0.0 <= p_cross && p_cross <= p_in && p_in <= 1.0)) {
    throw ArgumentError("probabilities must satisfy 0 <= p_cross <= p_in <= 1");
  }
  if (steps < 1) throw ArgumentError("steps must be >= 1");
  const int min_block = *std::min_element(block_sizes.begin(), block_sizes.end());
  if (migrate_lo < 0 || migrate_lo > migrate_hi || migrate_hi > min_block) {
    throw ArgumentError("migration range must satisfy 0 <= lo <= hi <= min block size");
  }
  if (cross_edges_per_migrant < 0) throw ArgumentError("cross_edges_per_migrant must be >= 0");
}

SbmConfig shift_config(std::uint64_t seed) {
  SbmConfig cfg;
  cfg.migrate_lo = 10;
  cfg.migrate_hi = 10;
  cfg.scenario = Scenario::kShift;
  cfg.seed = seed;
  return cfg;
}

SbmConfig diminish_config(std::uint64_t seed) {
  SbmConfig cfg;
  cfg.migrate_lo = 10;
  cfg.migrate_hi = 20;
  cfg.scenario = Scenario::kDiminish;
  cfg.seed = seed;
  return cfg;
}

StaticSbm generate_static(std::span<const int> block_sizes, double p_in, double p_cross,
                          std::uint64_t seed) {
  Rng rng(seed);
  return generate_static(block_sizes, p_in, p_cross, rng);
}

EvolveResult evolve_step(const graph::Snapshot& s, std::span<const int> labels,
                         std::span<const Migration> pending, const SbmConfig& cfg, Rng& rng,
                         bool select_next) {
  const int n = s.num_nodes();
  if (static_cast<int>(labels.size()) != n) throw ArgumentError("labels do not match snapshot");
  EdgeSet edges(s);
  EvolveResult out;
  out.labels.assign(labels.begin(), labels.end());

  // Previously selected nodes join their destination community.
  std::vector<char> moving(n, 0);
  for (const Migration& m : pending) {
    out.labels[m.node] = m.destination;
    moving[m.node] = 1;
  }
  for (const Migration& m : pending) {
    const int u = m.node;
    for (int v = 0; v < n; ++v) {
      if (v == u || (moving[v] && v < u)) continue;  // migrant pairs sampled once
      const double p = out.labels[u] == out.labels[v] ? cfg.p_in : cfg.p_cross;
      edges.set(u, v, rng.bernoulli(p));
    }
  }
  if (cfg.keep_cross_edges) {
    for (const Migration& m : pending) {
      for (int v : m.cross_neighbors) edges.set(m.node, v, true);
    }
  }

  if (select_next) {
    const int count = rng.between(cfg.migrate_lo, cfg.migrate_hi);
    std::vector<int> source = members_of(out.labels, kSourceCommunity);
    if (static_cast<int>(source.size()) < count) {
      out.truncated = true;
    } else if (count > 0) {
      int destination = 0;
      const int blocks = static_cast<int>(cfg.block_sizes.size());
      if (cfg.scenario == Scenario::kShift && blocks > 2) {
        destination = rng.between(0, blocks - 2);
        if (destination >= kSourceCommunity) ++destination;
      }
      std::vector<int> targets = members_of(out.labels, destination);
      const auto per_node = std::min<std::size_t>(cfg.cross_edges_per_migrant, targets.size());
      std::vector<int> chosen = rng.sample(std::move(source), static_cast<std::size_t>(count));
      std::sort(chosen.begin(), chosen.end());
      for (int u : chosen) {
        Migration m{u, destination, rng.sample(targets, per_node)};
        for (int v : m.cross_neighbors) edges.set(u, v, true);
        out.migrants.push_back(std::move(m));
      }
    }
  }
  out.snapshot = edges.to_snapshot();
  return out;
}

LabeledDynamicGraph generate_dynamic(const SbmConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  StaticSbm start = generate_static(cfg.block_sizes, cfg.p_in, cfg.p_cross, rng);

  std::vector<graph::Snapshot> snapshots;
  LabeledDynamicGraph out{graph::DynamicGraph({start.snapshot}), {}, {}, {}, false};
  std::vector<Migration> pending;
  graph::Snapshot current = std::move(start.snapshot);
  std::vector<int> labels = std::move(start.labels);
  for (int t = 0; t < cfg.steps; ++t) {
    const bool select = t + 1 < cfg.steps;
    if (t > 0 || select) {
      EvolveResult step = evolve_step(current, labels, pending, cfg, rng, select);
      current = std::move(step.snapshot);
      labels = std::move(step.labels);
      pending = std::move(step.migrants);
      out.truncated = step.truncated;
    }
    snapshots.push_back(current);
    out.labels.push_back(labels);
    std::vector<int> ids;
    std::vector<int> destinations;
    for (const Migration& m : pending) {
      ids.push_back(m.node);
      destinations.push_back(m.destination);
    }
    out.migrants.push_back(std::move(ids));
    out.destinations.push_back(std::move(destinations));
    if (out.truncated) break;
  }
  out.graph = graph::DynamicGraph(std::move(snapshots));
  return out;
}

void save_labels(const LabeledDynamicGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& step : g.labels) {
    for (std::size_t i = 0; i < step.size(); ++i) out << (i ? " " : "") << step[i];
    out << '\n';
  }
}

std::vector<std::vector<int>> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<int>> labels;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::vector<int> step;
    int id;
    while (ss >> id) step.push_back(id);
    if (!ss.eof()) throw ParseError(number, "expected integer community ids");
    if (!labels.empty() && step.size() != labels.front().size()) {
      throw ParseError(number, "label count differs from first line");
    }
    labels.push_back(std::move(step));
  }
  return labels;
}

}  // namespace dynembed::sbm

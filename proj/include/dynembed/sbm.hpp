#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dynembed/graph.hpp"
#include "dynembed/random.hpp"

namespace dynembed::sbm {

enum class Scenario { kShift, kDiminish };

struct SbmConfig {
  std::vector<int> block_sizes{500, 500};
  double p_in = 0.1;
  double p_cross = 0.01;
  int steps = 10;
  int migrate_lo = 10;
  int migrate_hi = 20;
  int cross_edges_per_migrant = 30;
  Scenario scenario = Scenario::kDiminish;
  std::uint64_t seed = 0;
  // Keep the pre-migration cross edges when a migrant's edges are resampled.
  bool keep_cross_edges = false;

  void validate() const;
};

// Community shift: 10 migrants per step, each gaining 30 edges to the other
// community one step before it moves.
SbmConfig shift_config(std::uint64_t seed);
// Community diminishing: 10-20 nodes leave community 1 for community 0 per step.
SbmConfig diminish_config(std::uint64_t seed);

struct StaticSbm {
  graph::Snapshot snapshot;
  std::vector<int> labels;
};

StaticSbm generate_static(std::span<const int> block_sizes, double p_in, double p_cross,
                          std::uint64_t seed);

// A node selected to change community at the next step.
struct Migration {
  int node = 0;
  int destination = 0;
  std::vector<int> cross_neighbors;  // destination members it was linked to
};

struct EvolveResult {
  graph::Snapshot snapshot;
  std::vector<int> labels;
  // Nodes selected in this step. They carry the extra cross edges in
  // `snapshot` and change community in the following step.
  std::vector<Migration> migrants;
  bool truncated = false;
};

// Advances the process by one step: the previously selected migrants
// (`pending`) change community and have all their incident edges resampled
// under the new membership, then a new group is selected and each selected
// node gains edges to random members of its destination community. Pass
// select_next = false to finalize the last step without a new selection.
EvolveResult evolve_step(const graph::Snapshot& s, std::span<const int> labels,
                         std::span<const Migration> pending, const SbmConfig& cfg, Rng& rng,
                         bool select_next = true);

struct LabeledDynamicGraph {
  graph::DynamicGraph graph;
  std::vector<std::vector<int>> labels;    // labels[t][node]
  std::vector<std::vector<int>> migrants;  // migrants[t] change label at t+1
  std::vector<std::vector<int>> destinations;  // parallel to migrants
  bool truncated = false;
};

LabeledDynamicGraph generate_dynamic(const SbmConfig& cfg);

// One line of space-separated community ids per step.
void save_labels(const LabeledDynamicGraph& g, const std::filesystem::path& path);
std::vector<std::vector<int>> load_labels(const std::filesystem::path& path);

}  // namespace dynembed::sbm

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "dynembed/linalg.hpp"

namespace dynembed::graph {

struct Edge {
  int u = 0;
  int v = 0;
  double w = 1.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// One time step of an evolving graph. Edges are validated on construction and
// kept sorted; undirected edges are stored once with u < v.
class Snapshot {
 public:
  Snapshot() = default;
  Snapshot(int num_nodes, std::vector<Edge> edges, bool directed);

  int num_nodes() const { return num_nodes_; }
  bool directed() const { return directed_; }
  std::span<const Edge> edges() const { return edges_; }
  std::size_t num_edges() const { return edges_.size(); }

  // Number of non-zero entries of the materialized adjacency.
  std::size_t num_entries() const { return directed_ ? edges_.size() : 2 * edges_.size(); }

  double max_weight() const;

  // Adjacency with entries scaled by the snapshot's maximum weight, so every
  // entry lies in [0, 1]. Undirected edges appear at (u,v) and (v,u).
  SparseMatrix sparse_adjacency() const;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;

 private:
  int num_nodes_ = 0;
  bool directed_ = false;
  std::vector<Edge> edges_;
};

Matrix materialize_adjacency(const Snapshot& snapshot);

// Records which time steps were read through a DynamicGraph. Used to audit
// that evaluation never touches the step being predicted.
class AccessRecorder {
 public:
  void record(int t);
  void clear();
  std::vector<int> accessed() const;
  int max_accessed() const;  // -1 if nothing was read

 private:
  mutable std::mutex mutex_;
  std::vector<int> accessed_;
};

// Fixed node set observed over an ordered sequence of snapshots. Copies share
// the underlying snapshot storage.
class DynamicGraph {
 public:
  explicit DynamicGraph(std::vector<Snapshot> snapshots);

  int num_nodes() const { return data_->num_nodes; }
  int num_steps() const { return static_cast<int>(data_->snapshots.size()); }
  bool directed() const { return data_->directed; }

  const Snapshot& snapshot(int t) const;
  // Normalized sparse adjacency of step t (cached).
  const SparseMatrix& adjacency(int t) const;

  // The first `steps` snapshots.
  DynamicGraph prefix(int steps) const;

  // A view sharing the same data whose reads are reported to `recorder`.
  DynamicGraph observed_by(std::shared_ptr<AccessRecorder> recorder) const;

  friend bool operator==(const DynamicGraph& a, const DynamicGraph& b) {
    return a.data_->snapshots == b.data_->snapshots;
  }

 private:
  struct Data {
    int num_nodes = 0;
    bool directed = false;
    std::vector<Snapshot> snapshots;
    std::vector<SparseMatrix> adjacency;
  };

  explicit DynamicGraph(std::shared_ptr<const Data> data) : data_(std::move(data)) {}
  void check_step(int t) const;

  std::shared_ptr<const Data> data_;
  std::shared_ptr<AccessRecorder> recorder_;
};

// Row u of the normalized adjacency at step t.
Vector neighborhood_vector(const DynamicGraph& g, int t, int u);

// lb consecutive input snapshots followed by the snapshot to predict.
struct Window {
  int start = 0;
  std::vector<SparseMatrix> inputs;
  SparseMatrix target;

  int lookback() const { return static_cast<int>(inputs.size()); }
  int target_step() const { return start + lookback(); }
};

// One window per target step tau in [max(t_lo, lb), t_hi).
std::vector<Window> make_windows(const DynamicGraph& g, int lookback, int t_lo, int t_hi);

struct SampledGraph {
  DynamicGraph graph;
  std::vector<int> old_to_new;  // -1 for dropped nodes
  std::vector<int> new_to_old;
};

// Induced subgraph on k nodes drawn uniformly without replacement. Kept nodes
// are relabeled in ascending order of their original ids.
SampledGraph sample_nodes(const DynamicGraph& g, int k, std::uint64_t seed);

// Plain-text snapshot format:
//   n T directed|undirected
//   # t <index> <edge-count>
//   <u> <v> <w>
DynamicGraph read_snapshots(std::istream& in);
void write_snapshots(const DynamicGraph& g, std::ostream& out);
DynamicGraph load_snapshots(const std::filesystem::path& path);
void save_snapshots(const DynamicGraph& g, const std::filesystem::path& path);

}  // namespace dynembed::graph

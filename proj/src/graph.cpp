#include "dynembed/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>

#include "dynembed/errors.hpp"
#include "dynembed/random.hpp"

namespace dynembed::graph {

namespace {

std::uint64_t edge_key(int u, int v) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
         static_cast<std::uint32_t>(v);
}

std::string describe(const Edge& e) {
  return "(" + std::to_string(e.u) + ", " + std::to_string(e.v) + ")";
}

}  // namespace

Snapshot::Snapshot(int num_nodes, std::vector<Edge> edges, bool directed)
    : num_nodes_(num_nodes), directed_(directed), edges_(std::move(edges)) {
  if (num_nodes < 0) throw ArgumentError("negative node count");
  for (Edge& e : edges_) {
    if (e.u < 0 || e.v < 0 || e.u >= num_nodes || e.v >= num_nodes) {
      throw ArgumentError("edge " + describe(e) + " out of range for n=" +
                          std::to_string(num_nodes));
    }
    if (e.u == e.v) throw ArgumentError("self-loop at node " + std::to_string(e.u));
    if (!(e.w >= 0.0) || !std::isfinite(e.w)) {
      throw ArgumentError("edge " + describe(e) + " has invalid weight");
    }
    if (!directed_ && e.u > e.v) std::swap(e.u, e.v);
  }
  std::sort(edges_.begin(), edges_.end(),
            [](const Edge& a, const Edge& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); });
  auto dup = std::adjacent_find(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
    return a.u == b.u && a.v == b.v;
  });
  if (dup != edges_.end()) throw ArgumentError("duplicate edge " + describe(*dup));
}

double Snapshot::max_weight() const {
  double m = 0.0;
  for (const Edge& e : edges_) m = std::max(m, e.w);
  return m;
}

SparseMatrix Snapshot::sparse_adjacency() const {
  const double scale = max_weight();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(num_entries());
  for (const Edge& e : edges_) {
    const double w = scale > 0.0 ? e.w / scale : 0.0;
    if (w == 0.0) continue;
    triplets.emplace_back(e.u, e.v, w);
    if (!directed_) triplets.emplace_back(e.v, e.u, w);
  }
  SparseMatrix m(num_nodes_, num_nodes_);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

Matrix materialize_adjacency(const Snapshot& snapshot) {
  return Matrix(snapshot.sparse_adjacency());
}

void AccessRecorder::record(int t) {
  std::lock_guard lock(mutex_);
  accessed_.push_back(t);
}

void AccessRecorder::clear() {
  std::lock_guard lock(mutex_);
  accessed_.clear();
}

std::vector<int> AccessRecorder::accessed() const {
  std::lock_guard lock(mutex_);
  return accessed_;
}

int AccessRecorder::max_accessed() const {
  std::lock_guard lock(mutex_);
  return accessed_.empty() ? -1 : *std::max_element(accessed_.begin(), accessed_.end());
}

DynamicGraph::DynamicGraph(std::vector<Snapshot> snapshots) {
  if (snapshots.empty()) throw ArgumentError("a dynamic graph needs at least one snapshot");
  auto data = std::make_shared<Data>();
  data->num_nodes = snapshots.front().num_nodes();
  data->directed = snapshots.front().directed();
  for (std::size_t t = 0; t < snapshots.size(); ++t) {
    if (snapshots[t].num_nodes() != data->num_nodes) {
      throw ArgumentError("snapshot " + std::to_string(t) + " has " +
                          std::to_string(snapshots[t].num_nodes()) + " nodes, expected " +
                          std::to_string(data->num_nodes));
    }
    if (snapshots[t].directed() != data->directed) {
      throw ArgumentError("snapshot " + std::to_string(t) + " differs in directedness");
    }
  }
  data->adjacency.reserve(snapshots.size());
  for (const Snapshot& s : snapshots) data->adjacency.push_back(s.sparse_adjacency());
  data->snapshots = std::move(snapshots);
  data_ = std::move(data);
}

void DynamicGraph::check_step(int t) const {
  if (t < 0 || t >= num_steps()) {
    throw std::out_of_range("time step " + std::to_string(t) + " outside [0, " +
                            std::to_string(num_steps()) + ")");
  }
  if (recorder_) recorder_->record(t);
}

const Snapshot& DynamicGraph::snapshot(int t) const {
  check_step(t);
  return data_->snapshots[t];
}

const SparseMatrix& DynamicGraph::adjacency(int t) const {
  check_step(t);
  return data_->adjacency[t];
}

DynamicGraph DynamicGraph::prefix(int steps) const {
  if (steps < 1 || steps > num_steps()) {
    throw ArgumentError("prefix length " + std::to_string(steps) + " outside [1, " +
                        std::to_string(num_steps()) + "]");
  }
  if (steps == num_steps()) return *this;
  auto data = std::make_shared<Data>();
  data->num_nodes = data_->num_nodes;
  data->directed = data_->directed;
  data->snapshots.assign(data_->snapshots.begin(), data_->snapshots.begin() + steps);
  data->adjacency.assign(data_->adjacency.begin(), data_->adjacency.begin() + steps);
  DynamicGraph out(std::move(data));
  out.recorder_ = recorder_;
  return out;
}

DynamicGraph DynamicGraph::observed_by(std::shared_ptr<AccessRecorder> recorder) const {
  DynamicGraph out(data_);
  out.recorder_ = std::move(recorder);
  return out;
}

Vector neighborhood_vector(const DynamicGraph& g, int t, int u) {
  if (u < 0 || u >= g.num_nodes()) {
    throw std::out_of_range("node " + std::to_string(u) + " outside [0, " +
                            std::to_string(g.num_nodes()) + ")");
  }
  const SparseMatrix& a = g.adjacency(t);
  Vector row = Vector::Zero(g.num_nodes());
  for (SparseMatrix::InnerIterator it(a, u); it; ++it) row[it.col()] = it.value();
  return row;
}

std::vector<Window> make_windows(const DynamicGraph& g, int lookback, int t_lo, int t_hi) {
  if (lookback < 1) throw ArgumentError("lookback must be >= 1");
  if (t_lo < 0 || t_hi > g.num_steps()) {
    throw ArgumentError("window range [" + std::to_string(t_lo) + ", " + std::to_string(t_hi) +
                        ") outside [0, " + std::to_string(g.num_steps()) + ")");
  }
  std::vector<Window> windows;
  for (int tau = std::max(t_lo, lookback); tau < t_hi; ++tau) {
    Window w;
    w.start = tau - lookback;
    for (int i = 0; i < lookback; ++i) w.inputs.push_back(g.adjacency(w.start + i));
    w.target = g.adjacency(tau);
    windows.push_back(std::move(w));
  }
  return windows;
}

SampledGraph sample_nodes(const DynamicGraph& g, int k, std::uint64_t seed) {
  const int n = g.num_nodes();
  if (k < 1 || k > n) {
    throw ArgumentError("sample size " + std::to_string(k) + " outside [1, " +
                        std::to_string(n) + "]");
  }
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  Rng rng(seed);
  std::vector<int> kept = rng.sample(std::move(all), static_cast<std::size_t>(k));
  std::sort(kept.begin(), kept.end());

  std::vector<int> old_to_new(n, -1);
  for (int i = 0; i < k; ++i) old_to_new[kept[i]] = i;

  std::vector<Snapshot> snapshots;
  for (int t = 0; t < g.num_steps(); ++t) {
    const Snapshot& s = g.snapshot(t);
    std::vector<Edge> edges;
    for (const Edge& e : s.edges()) {
      const int u = old_to_new[e.u];
      const int v = old_to_new[e.v];
      if (u >= 0 && v >= 0) edges.push_back({u, v, e.w});
    }
    snapshots.emplace_back(k, std::move(edges), s.directed());
  }
  return {DynamicGraph(std::move(snapshots)), std::move(old_to_new), std::move(kept)};
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  // Next non-blank line; false at end of input.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  }

  int number() const { return number_; }

 private:
  std::istream& in_;
  int number_ = 0;
};

std::vector<std::string> split(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

template <typename T>
bool parse_number(const std::string& tok, T& out) {
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

DynamicGraph read_snapshots(std::istream& in) {
  LineReader reader(in);
  std::string line;
  if (!reader.next(line)) throw ParseError(reader.number(), "missing header");
  auto header = split(line);
  int n = 0;
  int steps = 0;
  if (header.size() != 3 || !parse_number(header[0], n) || !parse_number(header[1], steps) ||
      n < 0 || steps < 1 || (header[2] != "directed" && header[2] != "undirected")) {
    throw ParseError(reader.number(), "expected header 'n T directed|undirected'");
  }
  const bool directed = header[2] == "directed";

  std::vector<Snapshot> snapshots;
  snapshots.reserve(steps);
  for (int t = 0; t < steps; ++t) {
    if (!reader.next(line)) {
      throw ParseError(reader.number(), "expected " + std::to_string(steps) +
                                            " snapshot blocks, found " + std::to_string(t));
    }
    auto block = split(line);
    int index = 0;
    long long count = 0;
    if (block.size() != 4 || block[0] != "#" || block[1] != "t" ||
        !parse_number(block[2], index) || !parse_number(block[3], count) || count < 0) {
      throw ParseError(reader.number(), "expected block header '# t <index> <edge-count>'");
    }
    if (index != t) {
      throw ParseError(reader.number(), "block index " + std::to_string(index) +
                                            " out of order, expected " + std::to_string(t));
    }
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(count));
    std::unordered_set<std::uint64_t> seen;
    for (long long i = 0; i < count; ++i) {
      if (!reader.next(line)) throw ParseError(reader.number(), "truncated edge list");
      auto tok = split(line);
      Edge e;
      if (tok.size() != 3 || !parse_number(tok[0], e.u) || !parse_number(tok[1], e.v) ||
          !parse_number(tok[2], e.w)) {
        throw ParseError(reader.number(), "expected '<u> <v> <w>'");
      }
      if (e.u < 0 || e.v < 0 || e.u >= n || e.v >= n) {
        throw ParseError(reader.number(), "node id out of range for n=" + std::to_string(n));
      }
      if (e.u == e.v) throw ParseError(reader.number(), "self-loop");
      if (!(e.w >= 0.0) || !std::isfinite(e.w)) {
        throw ParseError(reader.number(), "weight must be finite and non-negative");
      }
      const auto key = directed ? edge_key(e.u, e.v)
                                : edge_key(std::min(e.u, e.v), std::max(e.u, e.v));
      if (!seen.insert(key).second) throw ParseError(reader.number(), "duplicate edge");
      edges.push_back(e);
    }
    snapshots.emplace_back(n, std::move(edges), directed);
  }
  if (reader.next(line)) throw ParseError(reader.number(), "unexpected trailing content");
  return DynamicGraph(std::move(snapshots));
}

void write_snapshots(const DynamicGraph& g, std::ostream& out) {
  out << g.num_nodes() << ' ' << g.num_steps() << ' '
      << (g.directed() ? "directed" : "undirected") << '\n';
  char buf[64];
  for (int t = 0; t < g.num_steps(); ++t) {
    const Snapshot& s = g.snapshot(t);
    out << "# t " << t << ' ' << s.num_edges() << '\n';
    for (const Edge& e : s.edges()) {
      auto res = std::to_chars(buf, buf + sizeof(buf), e.w);
      out << e.u << ' ' << e.v << ' ' << std::string_view(buf, res.ptr - buf) << '\n';
    }
  }
}

DynamicGraph load_snapshots(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_snapshots(in);
}

void save_snapshots(const DynamicGraph& g, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_snapshots(g, out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace dynembed::graph

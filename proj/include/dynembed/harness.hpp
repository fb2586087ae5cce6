#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dynembed/config.hpp"
#include "dynembed/graph.hpp"
#include "dynembed/metrics.hpp"
#include "dynembed/models.hpp"

namespace dynembed::harness {

// Graph sequence ready for an experiment, after optional node sampling.
struct Dataset {
  graph::DynamicGraph graph{std::vector<graph::Snapshot>{graph::Snapshot(1, {}, false)}};
  std::vector<int> node_ids;  // original id of every node
  // Community labels and migrants per step (SBM datasets only), in the
  // sampled node numbering.
  std::vector<std::vector<int>> labels;
  std::vector<std::vector<int>> migrants;
};

// Two random graphs X and Y arranged as X, X, Y, Y, X, X, ... A single past
// snapshot cannot tell whether the next step repeats or switches; two can.
graph::DynamicGraph periodic_graph(int nodes, int steps, double density, std::uint64_t seed);

Dataset load_dataset(const DatasetConfig& cfg, int sample_nodes = 0, std::uint64_t sample_seed = 0);
Dataset load_dataset(const ExperimentConfig& cfg);

// First evaluated step for a sequence of `steps` snapshots. Throws
// ArgumentError naming `boundary` or `lookback` when the split is unusable.
int resolve_boundary(const ExperimentConfig& cfg, int steps);

// Per target step, the latest snapshot the predictor read.
struct LeakageAudit {
  std::vector<int> targets;
  std::vector<int> max_read;
  int train_max_read = -1;  // latest snapshot read while fitting
  int boundary = 0;
  bool clean() const;
};

struct RunResult {
  metrics::EvalReport report;
  LeakageAudit audit;
  models::TrainLog train_log;
  std::optional<models::Model> model;  // last trained model, learned methods only
  int boundary = 0;
};

// Fits on [0, boundary) and predicts every target in [boundary, T). With
// train_end > 0 the learned model sees only windows whose target precedes
// train_end.
RunResult run_experiment(const ExperimentConfig& cfg, const graph::DynamicGraph& g, int train_end = 0);
RunResult run_experiment(const ExperimentConfig& cfg);

struct SweepRow {
  int value = 0;
  double mean_map = 0.0;
  std::vector<int> targets;
  std::vector<double> step_maps;
};

struct SweepResult {
  std::string axis;  // "lookback" or "history"
  std::string method;
  std::vector<SweepRow> rows;
};

// One run per lookback with identical seeds; points run concurrently on up
// to thread_limit() threads.
SweepResult sweep_lookback(const ExperimentConfig& cfg, const graph::DynamicGraph& g, std::vector<int> lbs);
// Training prefixes of increasing length, each ending at or before the
// boundary, evaluated on the fixed range [boundary, T). Learned methods only.
SweepResult sweep_history(const ExperimentConfig& cfg, const graph::DynamicGraph& g);

// Worker count from DYNEMBED_THREADS, else the hardware concurrency.
int thread_limit();

// Header "id,y0,...", then one row per node with shortest round-trip floats.
void write_embeddings_csv(const Matrix& y, std::span<const int> node_ids, std::ostream& out);
void export_embeddings(const models::Model& model, const Dataset& data, int t, const std::filesystem::path& path);
void export_embeddings(const std::filesystem::path& checkpoint, const ExperimentConfig& cfg, int t,
                       const std::filesystem::path& path);

// Shortest decimal form that parses back to the same double.
std::string format_double(double x);

// SHA-1 of "blob <size>\0<content>", as git computes object ids.
std::string git_blob_sha1(const std::string& content);

void write_report_csv(const metrics::EvalReport& report, std::ostream& out);
void write_sweep_csv(const SweepResult& sweep, std::ostream& out);
nlohmann::json report_json(const RunResult& result);

// Named input whose content is hashed into the manifest.
struct ManifestInput {
  std::string name;
  std::string content;
};
nlohmann::json manifest_json(const ExperimentConfig& cfg, const std::vector<ManifestInput>& inputs,
                             const std::vector<ManifestInput>& outputs = {});
// Content identifying the dataset: the snapshot file for file datasets, the
// serialized generated sequence otherwise.
std::vector<ManifestInput> dataset_inputs(const ExperimentConfig& cfg, const Dataset& data);

// report.csv, report.json, map.svg, model.ckpt (learned methods) and
// manifest.json, which also lists the hashes of the files written.
// `extra_inputs` (e.g. the config file) are hashed into the manifest.
void write_run_outputs(const ExperimentConfig& cfg, const Dataset& data, const RunResult& result,
                       const std::filesystem::path& out_dir, const std::vector<ManifestInput>& extra_inputs = {});
// sweep.csv, sweep.json, <axis>.svg and manifest.json. Throws before
// writing anything when the sweep has no rows.
void write_sweep_outputs(const ExperimentConfig& cfg, const Dataset& data, const SweepResult& sweep,
                         const std::filesystem::path& out_dir, const std::vector<ManifestInput>& extra_inputs = {});

}  // namespace dynembed::harness

#include "dynembed/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "dynembed/errors.hpp"
#include "dynembed/plot.hpp"
#include "dynembed/random.hpp"
#include "dynembed/sbm.hpp"
#include "dynembed/svd.hpp"

namespace dynembed::harness {

using nlohmann::json;

graph::DynamicGraph periodic_graph(int nodes, int steps, double density, std::uint64_t seed) {
  if (nodes < 2 || steps < 1 || !(density > 0.0 && density <= 1.0)) {
    throw ArgumentError("periodic graph needs nodes >= 2, steps >= 1 and density in (0, 1]");
  }
  Rng rng(seed);
  auto random_graph = [&] {
    std::vector<graph::Edge> edges;
    for (int u = 0; u < nodes; ++u) {
      for (int v = u + 1; v < nodes; ++v) {
        if (rng.bernoulli(density)) edges.push_back({u, v, 1.0});
      }
    }
    return graph::Snapshot(nodes, std::move(edges), false);
  };
  const graph::Snapshot x = random_graph();
  const graph::Snapshot y = random_graph();
  std::vector<graph::Snapshot> seq;
  for (int t = 0; t < steps; ++t) seq.push_back((t / 2) % 2 == 0 ? x : y);
  return graph::DynamicGraph(std::move(seq));
}

Dataset load_dataset(const DatasetConfig& cfg, int sample_nodes, std::uint64_t sample_seed) {
  Dataset data;
  switch (cfg.type) {
    case DatasetConfig::Type::kSbm: {
      auto generated = sbm::generate_dynamic(cfg.sbm);
      data.graph = generated.graph;
      data.labels = std::move(generated.labels);
      data.migrants = std::move(generated.migrants);
      break;
    }
    case DatasetConfig::Type::kFile:
      if (!std::filesystem::exists(cfg.path)) throw ArgumentError("dataset.path: no such file '" + cfg.path + "'");
      data.graph = graph::load_snapshots(cfg.path);
      break;
    case DatasetConfig::Type::kPeriodic:
      data.graph = periodic_graph(cfg.periodic_nodes, cfg.periodic_steps, cfg.periodic_density, cfg.periodic_seed);
      break;
  }
  const int n = data.graph.num_nodes();
  data.node_ids.resize(n);
  std::iota(data.node_ids.begin(), data.node_ids.end(), 0);
  if (sample_nodes > 0 && sample_nodes < n) {
    auto sampled = graph::sample_nodes(data.graph, sample_nodes, sample_seed);
    data.graph = sampled.graph;
    data.node_ids = sampled.new_to_old;
    for (auto& step : data.labels) {
      std::vector<int> kept;
      for (int old : sampled.new_to_old) kept.push_back(step[old]);
      step = std::move(kept);
    }
    for (auto& step : data.migrants) {
      std::vector<int> kept;
      for (int old : step) {
        if (sampled.old_to_new[old] >= 0) kept.push_back(sampled.old_to_new[old]);
      }
      step = std::move(kept);
    }
  } else if (sample_nodes > n) {
    throw ArgumentError("sample_nodes: " + std::to_string(sample_nodes) + " exceeds the " + std::to_string(n) +
                        " nodes of the dataset");
  }
  return data;
}

Dataset load_dataset(const ExperimentConfig& cfg) {
  return load_dataset(cfg.dataset, cfg.sample_nodes, cfg.sample_seed);
}

int resolve_boundary(const ExperimentConfig& cfg, int steps) {
  const int b = cfg.boundary > 0 ? cfg.boundary : steps / 2;
  if (is_learned(cfg.method)) {
    const int lb = cfg.lookback;
    if (steps < lb + 2) {
      throw ArgumentError("lookback: " + std::to_string(steps) + " snapshots cannot hold a training window and a "
                          "test step for lookback " + std::to_string(lb));
    }
    if (b < lb + 1 || b > steps - 1) {
      throw ArgumentError("boundary: " + std::to_string(b) + " outside [" + std::to_string(lb + 1) + ", " +
                          std::to_string(steps - 1) + "] for lookback " + std::to_string(lb));
    }
  } else if (b < 1 || b > steps - 1) {
    throw ArgumentError("boundary: " + std::to_string(b) + " outside [1, " + std::to_string(steps - 1) + "]");
  }
  return b;
}

bool LeakageAudit::clean() const {
  if (train_max_read >= boundary) return false;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (max_read[i] >= targets[i]) return false;
  }
  return true;
}

namespace {

Matrix dense(const SparseMatrix& m) { return Matrix(m.toDense()); }

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const graph::DynamicGraph& g, int train_end) {
  const int steps = g.num_steps();
  const int n = g.num_nodes();
  const int boundary = resolve_boundary(cfg, steps);
  if (train_end <= 0) train_end = boundary;
  if (train_end > boundary) throw ArgumentError("training range must end at or before the boundary");

  auto recorder = std::make_shared<graph::AccessRecorder>();
  const graph::DynamicGraph observed = g.observed_by(recorder);

  RunResult result;
  result.boundary = boundary;
  result.audit.boundary = boundary;
  std::vector<int> nodes(n);
  std::iota(nodes.begin(), nodes.end(), 0);

  metrics::Predictor inner;
  // Baseline state lives across predictor calls, which arrive in target order.
  svd::SvdState state;
  int absorbed = -1;

  std::optional<models::ModelSpec> spec;
  const models::TrainConfig tc = cfg.train_config();
  if (is_learned(cfg.method)) {
    spec = cfg.model_spec(n);
    if (!cfg.retrain_per_step) {
      result.model.emplace(*spec, cfg.seed);
      result.train_log = models::train(*result.model, observed, 0, train_end, tc);
      result.audit.train_max_read = recorder->max_accessed();
    }
    inner = [&](int target) {
      if (cfg.retrain_per_step) {
        result.model.emplace(*spec, cfg.seed);
        result.train_log = models::train(*result.model, observed, 0, target, tc);
      }
      return models::predict_next(*result.model, observed, target - 1);
    };
  } else {
    if (cfg.embed_dim > n) {
      throw ArgumentError("embed_dim: " + std::to_string(cfg.embed_dim) + " exceeds the node count " +
                          std::to_string(n));
    }
    inner = [&](int target) {
      if (cfg.method == Method::kOptimalSvd) {
        state = svd::optimal_svd(dense(observed.adjacency(target - 1)), cfg.embed_dim);
        return svd::svd_scores(state);
      }
      const double theta =
          cfg.method == Method::kIncSvd ? std::numeric_limits<double>::infinity() : cfg.theta;
      if (absorbed < 0) {
        state = svd::optimal_svd(dense(observed.adjacency(0)), cfg.embed_dim);
        absorbed = 0;
      }
      while (absorbed < target - 1) {
        ++absorbed;
        state = svd::rerun_svd_step(state, dense(observed.adjacency(absorbed)), theta);
      }
      return svd::svd_scores(state);
    };
  }

  // Reads made while predicting a target are attributed to that target.
  metrics::Predictor audited = [&](int target) {
    recorder->clear();
    Matrix scores = inner(target);
    result.audit.targets.push_back(target);
    result.audit.max_read.push_back(recorder->max_accessed());
    return scores;
  };
  metrics::EvalOptions options;
  options.new_links_only = cfg.new_links_only;
  result.report = metrics::evaluate_method(audited, g, boundary, steps, nodes, options);
  result.report.method = to_string(cfg.method);
  result.report.embed_dim = cfg.embed_dim;
  result.report.lookback = is_learned(cfg.method) ? cfg.lookback : 0;
  result.report.seed = cfg.seed;
  return result;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  const Dataset data = load_dataset(cfg);
  return run_experiment(cfg, data.graph);
}

int thread_limit() {
  if (const char* env = std::getenv("DYNEMBED_THREADS")) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(env, env + std::char_traits<char>::length(env), v);
    if (ec == std::errc() && *ptr == '\0' && v >= 1) return v;
    throw ArgumentError("DYNEMBED_THREADS must be a positive integer, got '" + std::string(env) + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

SweepRow to_row(int value, const metrics::EvalReport& report) {
  SweepRow row;
  row.value = value;
  row.mean_map = report.mean_map;
  for (const auto& s : report.steps) {
    row.targets.push_back(s.target);
    row.step_maps.push_back(s.map);
  }
  return row;
}

// Runs job(i) for i in [0, count) on up to thread_limit() workers and
// rethrows the first failure by index.
template <typename Job>
void parallel_for(int count, Job job) {
  const int workers = std::min(count, thread_limit());
  std::vector<std::exception_ptr> errors(count);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

SweepResult sweep_lookback(const ExperimentConfig& cfg, const graph::DynamicGraph& g, std::vector<int> lbs) {
  if (lbs.empty()) throw ArgumentError("lookbacks: empty sweep");
  for (std::size_t i = 0; i < lbs.size(); ++i) {
    if (lbs[i] < 1 || (i > 0 && lbs[i] <= lbs[i - 1])) {
      throw ArgumentError("lookbacks: values must be positive and strictly increasing");
    }
  }
  // Validate every point before spending time on any of them.
  for (int lb : lbs) {
    ExperimentConfig point = cfg;
    point.lookback = lb;
    resolve_boundary(point, g.num_steps());
  }
  SweepResult sweep{"lookback", to_string(cfg.method), std::vector<SweepRow>(lbs.size())};
  parallel_for(static_cast<int>(lbs.size()), [&](int i) {
    ExperimentConfig point = cfg;
    point.lookback = lbs[i];
    sweep.rows[i] = to_row(lbs[i], run_experiment(point, g).report);
  });
  return sweep;
}

SweepResult sweep_history(const ExperimentConfig& cfg, const graph::DynamicGraph& g) {
  if (!is_learned(cfg.method)) throw ArgumentError("method: history sweeps need a learned method");
  if (cfg.retrain_per_step) throw ArgumentError("retrain_per_step: not supported in history sweeps");
  const int lb = cfg.lookback;
  if (g.num_steps() < 2 * (lb + 1)) {
    throw ArgumentError("lookback: history sweeps need at least " + std::to_string(2 * (lb + 1)) +
                        " snapshots, got " + std::to_string(g.num_steps()));
  }
  const int boundary = resolve_boundary(cfg, g.num_steps());
  std::vector<int> prefixes;
  for (int p = lb + 1; p <= boundary; ++p) prefixes.push_back(p);
  SweepResult sweep{"history", to_string(cfg.method), std::vector<SweepRow>(prefixes.size())};
  parallel_for(static_cast<int>(prefixes.size()), [&](int i) {
    sweep.rows[i] = to_row(prefixes[i], run_experiment(cfg, g, prefixes[i]).report);
  });
  return sweep;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

void write_embeddings_csv(const Matrix& y, std::span<const int> node_ids, std::ostream& out) {
  if (static_cast<Eigen::Index>(node_ids.size()) != y.rows()) {
    throw DimensionError("embedding has " + std::to_string(y.rows()) + " rows for " +
                         std::to_string(node_ids.size()) + " node ids");
  }
  out << "id";
  for (Eigen::Index j = 0; j < y.cols(); ++j) out << ",y" << j;
  out << '\n';
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    out << node_ids[i];
    for (Eigen::Index j = 0; j < y.cols(); ++j) out << ',' << format_double(y(i, j));
    out << '\n';
  }
}

void export_embeddings(const models::Model& model, const Dataset& data, int t, const std::filesystem::path& path) {
  if (t < 0 || t >= data.graph.num_steps()) {
    throw ArgumentError("t: " + std::to_string(t) + " outside [0, " + std::to_string(data.graph.num_steps()) + ")");
  }
  if (t < model.spec().lookback - 1) {
    throw ArgumentError("t: embedding at step " + std::to_string(t) + " needs " +
                        std::to_string(model.spec().lookback) + " snapshots of history");
  }
  std::ostringstream out;
  write_embeddings_csv(models::embed(model, data.graph, t), data.node_ids, out);
  plot::write_file(path, out.str());
}

void export_embeddings(const std::filesystem::path& checkpoint, const ExperimentConfig& cfg, int t,
                       const std::filesystem::path& path) {
  if (!std::filesystem::exists(checkpoint)) {
    throw ArgumentError("checkpoint: no such file '" + checkpoint.string() + "'");
  }
  const models::Model model = models::load_checkpoint(checkpoint);
  const Dataset data = load_dataset(cfg);
  if (data.graph.num_nodes() != model.spec().n) {
    throw ArgumentError("checkpoint: model expects " + std::to_string(model.spec().n) + " nodes, dataset has " +
                        std::to_string(data.graph.num_nodes()));
  }
  export_embeddings(model, data, t, path);
}

std::string git_blob_sha1(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + std::string(1, '\0') + content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &length, EVP_sha1(), nullptr) != 1) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) {
    const unsigned char b = digest[i];
    hex += kHex[b >> 4];
    hex += kHex[b & 15];
  }
  return hex;
}

void write_report_csv(const metrics::EvalReport& report, std::ostream& out) {
  out << "method,embed_dim,lookback,seed,target,k,map,precision_at_k\n";
  for (const auto& s : report.steps) {
    for (std::size_t i = 0; i < metrics::kPrecisionKs.size(); ++i) {
      out << report.method << ',' << report.embed_dim << ',' << report.lookback << ',' << report.seed << ','
          << s.target << ',' << metrics::kPrecisionKs[i] << ',' << format_double(s.map) << ','
          << format_double(s.precision[i]) << '\n';
    }
  }
}

void write_sweep_csv(const SweepResult& sweep, std::ostream& out) {
  out << "method,axis,value,target,map\n";
  for (const auto& row : sweep.rows) {
    for (std::size_t i = 0; i < row.targets.size(); ++i) {
      out << sweep.method << ',' << sweep.axis << ',' << row.value << ',' << row.targets[i] << ','
          << format_double(row.step_maps[i]) << '\n';
    }
    out << sweep.method << ',' << sweep.axis << ',' << row.value << ",mean," << format_double(row.mean_map) << '\n';
  }
}

json report_json(const RunResult& result) {
  const auto& r = result.report;
  json steps = json::array();
  for (const auto& s : r.steps) {
    json precision = json::object();
    for (std::size_t i = 0; i < metrics::kPrecisionKs.size(); ++i) {
      precision[std::to_string(metrics::kPrecisionKs[i])] = s.precision[i];
    }
    steps.push_back({{"target", s.target},
                     {"map", s.map},
                     {"included", s.included},
                     {"excluded", s.excluded},
                     {"precision_at_k", precision}});
  }
  return {{"method", r.method},
          {"embed_dim", r.embed_dim},
          {"lookback", r.lookback},
          {"seed", r.seed},
          {"boundary", result.boundary},
          {"mean_map", r.mean_map},
          {"steps", steps},
          {"audit",
           {{"targets", result.audit.targets},
            {"max_read", result.audit.max_read},
            {"train_max_read", result.audit.train_max_read},
            {"clean", result.audit.clean()}}},
          {"train_loss", result.train_log.epoch_loss}};
}

namespace {

json hashed(const std::vector<ManifestInput>& items) {
  json out = json::array();
  for (const auto& item : items) {
    out.push_back({{"name", item.name}, {"bytes", item.content.size()}, {"sha1", git_blob_sha1(item.content)}});
  }
  return out;
}

}  // namespace

json manifest_json(const ExperimentConfig& cfg, const std::vector<ManifestInput>& inputs,
                   const std::vector<ManifestInput>& outputs) {
  return {{"tool", "dynembed"},
          {"version", "0.1.0"},
          {"config", config_to_json(cfg)},
          {"inputs", hashed(inputs)},
          {"outputs", hashed(outputs)}};
}

std::vector<ManifestInput> dataset_inputs(const ExperimentConfig& cfg, const Dataset& data) {
  std::vector<ManifestInput> inputs;
  if (cfg.dataset.type == DatasetConfig::Type::kFile) {
    inputs.push_back({std::filesystem::path(cfg.dataset.path).filename().string(), plot::read_file(cfg.dataset.path)});
  }
  std::ostringstream snapshots;
  graph::write_snapshots(data.graph, snapshots);
  inputs.push_back({"snapshots", snapshots.str()});
  return inputs;
}

namespace {

// Writes each (name, content) under dir, then the manifest naming them.
void write_bundle(const ExperimentConfig& cfg, const Dataset& data, const std::filesystem::path& dir,
                  const std::vector<ManifestInput>& files, std::vector<ManifestInput> inputs) {
  std::filesystem::create_directories(dir);
  for (const auto& f : files) plot::write_file(dir / f.name, f.content);
  auto all_inputs = dataset_inputs(cfg, data);
  all_inputs.insert(all_inputs.end(), inputs.begin(), inputs.end());
  plot::write_file(dir / "manifest.json", manifest_json(cfg, all_inputs, files).dump(2) + "\n");
}

}  // namespace

void write_run_outputs(const ExperimentConfig& cfg, const Dataset& data, const RunResult& result,
                       const std::filesystem::path& out_dir, const std::vector<ManifestInput>& extra_inputs) {
  std::ostringstream csv;
  write_report_csv(result.report, csv);
  std::vector<ManifestInput> files{{"report.csv", csv.str()},
                                   {"report.json", report_json(result).dump(2) + "\n"},
                                   {"map.svg", plot::report_chart({csv.str()})}};
  if (result.model) {
    std::ostringstream ckpt;
    models::write_checkpoint(*result.model, ckpt);
    files.push_back({"model.ckpt", ckpt.str()});
  }
  write_bundle(cfg, data, out_dir, files, extra_inputs);
}

void write_sweep_outputs(const ExperimentConfig& cfg, const Dataset& data, const SweepResult& sweep,
                         const std::filesystem::path& out_dir, const std::vector<ManifestInput>& extra_inputs) {
  if (sweep.rows.empty()) throw ArgumentError("sweep is empty");
  std::ostringstream csv;
  write_sweep_csv(sweep, csv);
  json rows = json::array();
  for (const auto& r : sweep.rows) {
    rows.push_back({{"value", r.value}, {"mean_map", r.mean_map}, {"targets", r.targets}, {"map", r.step_maps}});
  }
  const json summary = {{"method", sweep.method}, {"axis", sweep.axis}, {"rows", rows}};
  // Render before touching the directory so a bad sweep leaves nothing behind.
  const std::string svg = plot::sweep_chart({csv.str()});
  write_bundle(cfg, data, out_dir,
               {{"sweep.csv", csv.str()}, {"sweep.json", summary.dump(2) + "\n"}, {sweep.axis + ".svg", svg}},
               extra_inputs);
}

}  // namespace dynembed::harness

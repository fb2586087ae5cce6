#include "dynembed/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "dynembed/errors.hpp"

namespace dynembed::harness {

using nlohmann::json;

namespace {

constexpr struct {
  Method method;
  const char* name;
} kMethodNames[] = {
    {Method::kAE, "ae"},
    {Method::kRNN, "rnn"},
    {Method::kAERNN, "aernn"},
    {Method::kOptimalSvd, "optimal-svd"},
    {Method::kIncSvd, "inc-svd"},
    {Method::kRerunSvd, "rerun-svd"},
};

// Reads typed fields from one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j.is_object()) throw ArgumentError(where("") + "expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ArgumentError(where(key) + "invalid value (" + e.what() + ")");
    }
  }

  void read_theta(const char* key, double& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    if (it->is_string() && (*it == "inf" || *it == "infinity")) {
      out = std::numeric_limits<double>::infinity();
    } else if (it->is_number()) {
      out = it->get<double>();
    } else {
      throw ArgumentError(where(key) + "expected a number or \"inf\"");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ArgumentError(where(key) + "unknown key");
    }
  }

  std::string where(const std::string& key) const {
    const std::string path = prefix_.empty() ? key : key.empty() ? prefix_ : prefix_ + "." + key;
    return path.empty() ? "config: " : path + ": ";
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ArgumentError(field + ": " + message);
}

DatasetConfig dataset_from_json(const json& j) {
  DatasetConfig d;
  Fields f(j, "dataset");
  std::string type = "sbm";
  f.read("type", type);
  if (type == "sbm") {
    d.type = DatasetConfig::Type::kSbm;
    std::string scenario = "diminish";
    f.read("scenario", scenario);
    std::uint64_t seed = 0;
    f.read("seed", seed);
    if (scenario == "diminish") {
      d.sbm = sbm::diminish_config(seed);
    } else if (scenario == "shift") {
      d.sbm = sbm::shift_config(seed);
    } else {
      throw ArgumentError("dataset.scenario: expected \"diminish\" or \"shift\"");
    }
    f.read("block_sizes", d.sbm.block_sizes);
    f.read("p_in", d.sbm.p_in);
    f.read("p_cross", d.sbm.p_cross);
    f.read("steps", d.sbm.steps);
    f.read("migrate_lo", d.sbm.migrate_lo);
    f.read("migrate_hi", d.sbm.migrate_hi);
    f.read("cross_edges_per_migrant", d.sbm.cross_edges_per_migrant);
    f.read("keep_cross_edges", d.sbm.keep_cross_edges);
    try {
      d.sbm.validate();
    } catch (const ArgumentError& e) {
      throw ArgumentError(std::string("dataset: ") + e.what());
    }
  } else if (type == "file") {
    d.type = DatasetConfig::Type::kFile;
    f.read("path", d.path);
    require(!d.path.empty(), "dataset.path", "required for file datasets");
  } else if (type == "periodic") {
    d.type = DatasetConfig::Type::kPeriodic;
    f.read("nodes", d.periodic_nodes);
    f.read("steps", d.periodic_steps);
    f.read("density", d.periodic_density);
    f.read("seed", d.periodic_seed);
    require(d.periodic_nodes >= 2, "dataset.nodes", "must be at least 2");
    require(d.periodic_steps >= 2, "dataset.steps", "must be at least 2");
    require(d.periodic_density > 0.0 && d.periodic_density <= 1.0, "dataset.density", "must lie in (0, 1]");
  } else {
    throw ArgumentError("dataset.type: expected \"sbm\", \"file\" or \"periodic\"");
  }
  f.finish();
  return d;
}

json dataset_to_json(const DatasetConfig& d) {
  switch (d.type) {
    case DatasetConfig::Type::kSbm:
      return {{"type", "sbm"},
              {"scenario", d.sbm.scenario == sbm::Scenario::kShift ? "shift" : "diminish"},
              {"block_sizes", d.sbm.block_sizes},
              {"p_in", d.sbm.p_in},
              {"p_cross", d.sbm.p_cross},
              {"steps", d.sbm.steps},
              {"migrate_lo", d.sbm.migrate_lo},
              {"migrate_hi", d.sbm.migrate_hi},
              {"cross_edges_per_migrant", d.sbm.cross_edges_per_migrant},
              {"seed", d.sbm.seed},
              {"keep_cross_edges", d.sbm.keep_cross_edges}};
    case DatasetConfig::Type::kFile:
      return {{"type", "file"}, {"path", d.path}};
    case DatasetConfig::Type::kPeriodic:
      return {{"type", "periodic"},
              {"nodes", d.periodic_nodes},
              {"steps", d.periodic_steps},
              {"density", d.periodic_density},
              {"seed", d.periodic_seed}};
  }
  return {};
}

}  // namespace

const char* to_string(Method m) {
  for (const auto& entry : kMethodNames) {
    if (entry.method == m) return entry.name;
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  for (const auto& entry : kMethodNames) {
    if (name == entry.name) return entry.method;
  }
  throw ArgumentError("method: unknown method '" + name +
                      "' (expected ae, rnn, aernn, optimal-svd, inc-svd or rerun-svd)");
}

bool is_learned(Method m) { return m == Method::kAE || m == Method::kRNN || m == Method::kAERNN; }

models::ModelKind model_kind(Method m) {
  switch (m) {
    case Method::kAE: return models::ModelKind::kAE;
    case Method::kRNN: return models::ModelKind::kRNN;
    case Method::kAERNN: return models::ModelKind::kAERNN;
    default: throw ArgumentError(std::string("method: ") + to_string(m) + " is not a learned model");
  }
}

models::ModelSpec ExperimentConfig::model_spec(int n) const {
  models::ModelSpec spec = models::default_spec(model_kind(method), n, lookback, embed_dim);
  if (!encoder_widths.empty()) spec.encoder_widths = encoder_widths;
  if (!lstm_widths.empty()) spec.lstm_widths = lstm_widths;
  if (!decoder_widths.empty()) spec.decoder_widths = decoder_widths;
  if (!spec.decoder_widths.empty()) spec.decoder_widths.back() = n;
  return spec;
}

models::TrainConfig ExperimentConfig::train_config() const {
  models::TrainConfig tc;
  tc.beta = beta;
  tc.epochs = epochs;
  tc.batch_size = batch_size;
  tc.adam.lr = lr;
  tc.seed = seed;
  return tc;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  Fields f(j, "");
  if (const json* d = f.child("dataset")) c.dataset = dataset_from_json(*d);
  f.read("sample_nodes", c.sample_nodes);
  f.read("sample_seed", c.sample_seed);
  std::string method = to_string(c.method);
  f.read("method", method);
  c.method = method_from_string(method);
  f.read("embed_dim", c.embed_dim);
  f.read("lookback", c.lookback);
  f.read("encoder_widths", c.encoder_widths);
  f.read("lstm_widths", c.lstm_widths);
  f.read("decoder_widths", c.decoder_widths);
  if (const json* t = f.child("train")) {
    Fields tf(*t, "train");
    tf.read("beta", c.beta);
    tf.read("epochs", c.epochs);
    tf.read("batch_size", c.batch_size);
    tf.read("lr", c.lr);
    tf.finish();
  }
  f.read_theta("theta", c.theta);
  f.read("boundary", c.boundary);
  f.read("seed", c.seed);
  f.read("retrain_per_step", c.retrain_per_step);
  f.read("new_links_only", c.new_links_only);
  f.read("lookbacks", c.lookbacks);
  f.finish();

  require(c.sample_nodes >= 0, "sample_nodes", "must be non-negative");
  require(c.embed_dim >= 1, "embed_dim", "must be positive");
  require(c.lookback >= 1, "lookback", "must be at least 1");
  require(c.beta >= 1.0, "train.beta", "must be at least 1");
  require(c.epochs >= 1, "train.epochs", "must be at least 1");
  require(c.batch_size >= 1, "train.batch_size", "must be at least 1");
  require(c.lr > 0.0, "train.lr", "must be positive");
  require(c.theta >= 0.0, "theta", "must be non-negative");
  require(c.boundary >= 0, "boundary", "must be non-negative (0 selects T/2)");
  for (std::size_t i = 0; i < c.lookbacks.size(); ++i) {
    require(c.lookbacks[i] >= 1, "lookbacks", "values must be at least 1");
    require(i == 0 || c.lookbacks[i] > c.lookbacks[i - 1], "lookbacks", "must be strictly increasing");
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["dataset"] = dataset_to_json(c.dataset);
  j["sample_nodes"] = c.sample_nodes;
  j["sample_seed"] = c.sample_seed;
  j["method"] = to_string(c.method);
  j["embed_dim"] = c.embed_dim;
  j["lookback"] = c.lookback;
  j["encoder_widths"] = c.encoder_widths;
  j["lstm_widths"] = c.lstm_widths;
  j["decoder_widths"] = c.decoder_widths;
  j["train"] = {{"beta", c.beta}, {"epochs", c.epochs}, {"batch_size", c.batch_size}, {"lr", c.lr}};
  j["theta"] = std::isinf(c.theta) ? json("inf") : json(c.theta);
  j["boundary"] = c.boundary;
  j["seed"] = c.seed;
  j["retrain_per_step"] = c.retrain_per_step;
  j["new_links_only"] = c.new_links_only;
  j["lookbacks"] = c.lookbacks;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ArgumentError("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void set_json_path(json& j, const std::string& dotted, json value) {
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace dynembed::harness

#include "dynembed/models.hpp"

#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dynembed/errors.hpp"
#include "dynembed/nn/layers.hpp"
#include "dynembed/random.hpp"

namespace dynembed::models {

using nn::Activation;
using nn::Tape;
using nn::Var;

namespace {

constexpr Eigen::Index kInferenceChunk = 256;

std::string layer(const char* prefix, std::size_t i) { return std::string(prefix) + "/" + std::to_string(i); }

void check_widths(const std::vector<int>& widths, const char* field) {
  for (int w : widths) {
    if (w <= 0) throw ArgumentError(std::string(field) + ": widths must be positive");
  }
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<int> split_ints(const std::string& text, int line) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ParseError(line, "bad integer list '" + text + "'");
    }
  }
  return out;
}

std::vector<int> all_nodes(int n) {
  std::vector<int> nodes(n);
  std::iota(nodes.begin(), nodes.end(), 0);
  return nodes;
}

// Runs `fn` on successive node chunks and stacks the resulting rows.
template <typename Fn>
Matrix chunked(const Model& model, std::span<const SparseMatrix> window, Eigen::Index cols, Fn fn) {
  const int n = model.spec().n;
  if (static_cast<int>(window.size()) != model.spec().lookback) {
    throw DimensionError("window has " + std::to_string(window.size()) + " snapshots, model lookback is " +
                         std::to_string(model.spec().lookback));
  }
  const std::vector<int> nodes = all_nodes(n);
  Matrix out(n, cols);
  for (Eigen::Index lo = 0; lo < n; lo += kInferenceChunk) {
    const Eigen::Index count = std::min<Eigen::Index>(kInferenceChunk, n - lo);
    auto batch = std::span<const int>(nodes).subspan(lo, count);
    out.middleRows(lo, count) = fn(get_architecture_input(window, model.spec().kind, batch));
  }
  return out;
}

std::vector<SparseMatrix> window_ending_at(const Model& model, const graph::DynamicGraph& g, int t) {
  const int lb = model.spec().lookback;
  if (t < lb - 1 || t >= g.num_steps()) {
    throw ArgumentError("window ending at step " + std::to_string(t) + " needs " + std::to_string(lb) +
                        " snapshots; graph has " + std::to_string(g.num_steps()));
  }
  if (g.num_nodes() != model.spec().n) {
    throw DimensionError("graph has " + std::to_string(g.num_nodes()) + " nodes, model expects " +
                         std::to_string(model.spec().n));
  }
  std::vector<SparseMatrix> window;
  for (int s = t - lb + 1; s <= t; ++s) window.push_back(g.adjacency(s));
  return window;
}

}  // namespace

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kAE: return "ae";
    case ModelKind::kRNN: return "rnn";
    case ModelKind::kAERNN: return "aernn";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "ae") return ModelKind::kAE;
  if (name == "rnn") return ModelKind::kRNN;
  if (name == "aernn") return ModelKind::kAERNN;
  throw ArgumentError("unknown model kind '" + name + "'");
}

void ModelSpec::validate() const {
  if (n < 1) throw ArgumentError("n must be positive");
  if (lookback < 1) throw ArgumentError("lookback must be at least 1");
  if (embed_dim < 1) throw ArgumentError("embed_dim must be positive");
  check_widths(encoder_widths, "encoder_widths");
  check_widths(lstm_widths, "lstm_widths");
  check_widths(decoder_widths, "decoder_widths");
  switch (kind) {
    case ModelKind::kAE:
      if (encoder_widths.empty() || encoder_widths.back() != embed_dim) {
        throw ArgumentError("encoder_widths: AE encoder must end in embed_dim");
      }
      if (!lstm_widths.empty()) throw ArgumentError("lstm_widths: AE has no recurrent layers");
      break;
    case ModelKind::kRNN:
      if (!encoder_widths.empty()) throw ArgumentError("encoder_widths: RNN has no dense encoder");
      [[fallthrough]];
    case ModelKind::kAERNN:
      if (kind == ModelKind::kAERNN && encoder_widths.empty()) {
        throw ArgumentError("encoder_widths: AERNN needs a dense pre-encoder");
      }
      if (lstm_widths.empty() || lstm_widths.back() != embed_dim) {
        throw ArgumentError("lstm_widths: recurrent stack must end in embed_dim");
      }
      break;
  }
  if (decoder_widths.empty() || decoder_widths.back() != n) {
    throw ArgumentError("decoder_widths: decoder must end in n");
  }
}

ModelSpec default_spec(ModelKind kind, int n, int lookback, int embed_dim) {
  ModelSpec spec;
  spec.kind = kind;
  spec.n = n;
  spec.lookback = lookback;
  spec.embed_dim = embed_dim;
  switch (kind) {
    case ModelKind::kAE: spec.encoder_widths = {500, 300, embed_dim}; break;
    case ModelKind::kRNN: spec.lstm_widths = {500, 300, embed_dim}; break;
    case ModelKind::kAERNN:
      spec.encoder_widths = {500, 300};
      spec.lstm_widths = {embed_dim};
      break;
  }
  spec.decoder_widths = {300, 500, n};
  return spec;
}

void TrainConfig::validate(int n) const {
  if (epochs < 1) throw ArgumentError("epochs must be at least 1");
  if (batch_size < 1 || batch_size > n) {
    throw ArgumentError("batch_size must lie in [1, " + std::to_string(n) + "], got " +
                        std::to_string(batch_size));
  }
  if (!(beta >= 1.0)) throw ArgumentError("beta must be at least 1");
  if (!(adam.lr > 0.0)) throw ArgumentError("lr must be positive");
}

Matrix gather_rows(const SparseMatrix& m, std::span<const int> rows) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (SparseMatrix::InnerIterator it(m, rows[i]); it; ++it) out(i, it.col()) = it.value();
  }
  return out;
}

ArchitectureInput get_architecture_input(std::span<const SparseMatrix> inputs, ModelKind kind,
                                         std::span<const int> nodes) {
  if (inputs.empty()) throw ArgumentError("empty input window");
  const Eigen::Index n = inputs.front().cols();
  for (int u : nodes) {
    if (u < 0 || u >= inputs.front().rows()) throw std::out_of_range("node " + std::to_string(u));
  }
  const auto batch = static_cast<Eigen::Index>(nodes.size());
  ArchitectureInput out;
  auto rows_of = [&](std::size_t first, std::size_t count, Eigen::Index width) {
    std::vector<Eigen::Triplet<double>> triplets;
    for (Eigen::Index i = 0; i < batch; ++i) {
      for (std::size_t k = first; k < first + count; ++k) {
        const Eigen::Index offset = static_cast<Eigen::Index>(k - first) * n;
        for (SparseMatrix::InnerIterator it(inputs[k], nodes[i]); it; ++it) {
          triplets.emplace_back(i, offset + it.col(), it.value());
        }
      }
    }
    SparseMatrix m(batch, width);
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
  };
  if (kind == ModelKind::kAE) {
    out.steps.push_back(rows_of(0, inputs.size(), n * static_cast<Eigen::Index>(inputs.size())));
  } else {
    for (std::size_t k = 0; k < inputs.size(); ++k) out.steps.push_back(rows_of(k, 1, n));
  }
  return out;
}

ArchitectureInput get_architecture_input(const graph::Window& window, ModelKind kind,
                                         std::span<const int> nodes) {
  return get_architecture_input(window.inputs, kind, nodes);
}

Model::Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)), seed_(seed) {
  spec_.validate();
  Rng rng(seed);
  int width = spec_.input_width();
  for (std::size_t i = 0; i < spec_.encoder_widths.size(); ++i) {
    nn::init_dense(params_, layer("enc", i), width, spec_.encoder_widths[i], rng);
    width = spec_.encoder_widths[i];
  }
  for (std::size_t i = 0; i < spec_.lstm_widths.size(); ++i) {
    nn::init_lstm(params_, layer("lstm", i), width, spec_.lstm_widths[i], rng);
    width = spec_.lstm_widths[i];
  }
  for (std::size_t i = 0; i < spec_.decoder_widths.size(); ++i) {
    nn::init_dense(params_, layer("dec", i), width, spec_.decoder_widths[i], rng);
    width = spec_.decoder_widths[i];
  }
}

Model::Model(ModelSpec spec, std::uint64_t seed, nn::ParamStore params)
    : spec_(std::move(spec)), seed_(seed), params_(std::move(params)) {
  spec_.validate();
  Model reference(spec_, seed_);
  if (reference.params_.names() != params_.names()) {
    throw ArgumentError("parameter names do not match the model spec");
  }
  for (const auto& [name, p] : reference.params_) {
    const Matrix& got = params_.at(name).value;
    if (got.rows() != p.value.rows() || got.cols() != p.value.cols()) {
      throw DimensionError("parameter " + name + " has the wrong shape");
    }
  }
}

ForwardVars Model::forward(Tape& tape, const ArchitectureInput& input) {
  const bool ae = spec_.kind == ModelKind::kAE;
  const std::size_t expected_steps = ae ? 1 : static_cast<std::size_t>(spec_.lookback);
  if (input.steps.size() != expected_steps) {
    throw DimensionError("expected " + std::to_string(expected_steps) + " input steps, got " +
                         std::to_string(input.steps.size()));
  }
  for (const SparseMatrix& s : input.steps) {
    if (s.cols() != spec_.input_width() || s.rows() != input.batch()) {
      throw DimensionError("input step is " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                           ", expected width " + std::to_string(spec_.input_width()));
    }
  }

  auto encode_dense = [&](const nn::Input& x) {
    nn::Input h = x;
    Var out;
    for (std::size_t i = 0; i < spec_.encoder_widths.size(); ++i) {
      out = nn::dense_forward(tape, params_, layer("enc", i), h, spec_.encoder_activation);
      h = out;
    }
    return out;
  };

  Var embedding;
  if (ae) {
    embedding = encode_dense(input.steps.front());
  } else {
    std::vector<nn::Input> sequence;
    for (const SparseMatrix& s : input.steps) {
      if (spec_.kind == ModelKind::kAERNN) {
        sequence.emplace_back(encode_dense(s));
      } else {
        sequence.emplace_back(s);
      }
    }
    for (std::size_t l = 0; l < spec_.lstm_widths.size(); ++l) {
      nn::LstmState state = nn::lstm_zero_state(tape, input.batch(), spec_.lstm_widths[l]);
      std::vector<nn::Input> outputs;
      for (const nn::Input& x : sequence) {
        state = nn::lstm_cell_forward(tape, params_, layer("lstm", l), x, state);
        outputs.emplace_back(state.h);
      }
      sequence = std::move(outputs);
    }
    embedding = sequence.back().var;
  }

  Var h = embedding;
  const std::size_t last = spec_.decoder_widths.size() - 1;
  for (std::size_t i = 0; i <= last; ++i) {
    h = nn::dense_forward(tape, params_, layer("dec", i), h,
                          i == last ? Activation::kSigmoid : spec_.decoder_activation);
  }
  return {embedding, h};
}

// The tape reads parameter values and only writes gradients on backward(),
// which inference never calls, so sharing the store across threads is safe.
Matrix Model::embed_batch(const ArchitectureInput& input) const {
  Tape tape;
  auto vars = const_cast<Model*>(this)->forward(tape, input);
  return tape.value(vars.embedding);
}

Matrix Model::predict_batch(const ArchitectureInput& input) const {
  Tape tape;
  auto vars = const_cast<Model*>(this)->forward(tape, input);
  return tape.value(vars.prediction);
}

Var batch_loss(Tape& tape, Model& model, const ArchitectureInput& input, const Matrix& target,
               double beta) {
  Var pred = model.forward(tape, input).prediction;
  return tape.scale(tape.weighted_recon_loss(pred, target, beta),
                    1.0 / static_cast<double>(input.batch()));
}

TrainLog train(Model& model, const graph::DynamicGraph& g, int t_lo, int t_hi, const TrainConfig& cfg) {
  const ModelSpec& spec = model.spec();
  cfg.validate(spec.n);
  if (g.num_nodes() != spec.n) {
    throw DimensionError("graph has " + std::to_string(g.num_nodes()) + " nodes, model expects " +
                         std::to_string(spec.n));
  }
  const auto windows = graph::make_windows(g, spec.lookback, t_lo, t_hi);
  if (windows.empty()) {
    throw ArgumentError("no training windows with lookback " + std::to_string(spec.lookback) +
                        " and targets in [" + std::to_string(t_lo) + ", " + std::to_string(t_hi) + ")");
  }

  Rng rng(cfg.seed);
  std::vector<int> order = all_nodes(spec.n);
  TrainLog log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<int>(order));
    double total = 0.0;
    int batches = 0;
    for (const graph::Window& w : windows) {
      for (int lo = 0; lo < spec.n; lo += cfg.batch_size) {
        auto batch = std::span<const int>(order).subspan(lo, std::min(cfg.batch_size, spec.n - lo));
        Tape tape;
        Var loss = batch_loss(tape, model, get_architecture_input(w, spec.kind, batch),
                              gather_rows(w.target, batch), cfg.beta);
        total += tape.value(loss)(0, 0);
        ++batches;
        tape.backward(loss);
        nn::adam_step(model.params(), cfg.adam);
      }
    }
    log.epoch_loss.push_back(total / batches);
    if (cfg.on_epoch) cfg.on_epoch(epoch, log.epoch_loss.back());
  }
  return log;
}

Matrix embed(const Model& model, std::span<const SparseMatrix> window) {
  return chunked(model, window, model.spec().embed_dim,
                 [&](const ArchitectureInput& in) { return model.embed_batch(in); });
}

Matrix embed(const Model& model, const graph::DynamicGraph& g, int t) {
  return embed(model, window_ending_at(model, g, t));
}

Matrix predict_next(const Model& model, std::span<const SparseMatrix> window, bool directed) {
  Matrix scores = chunked(model, window, model.spec().n,
                          [&](const ArchitectureInput& in) { return model.predict_batch(in); });
  if (!directed) scores = (0.5 * (scores + scores.transpose())).eval();
  scores.diagonal().setZero();
  return scores;
}

Matrix predict_next(const Model& model, const graph::DynamicGraph& g, int t) {
  return predict_next(model, window_ending_at(model, g, t), g.directed());
}

void write_checkpoint(const Model& model, std::ostream& out) {
  const ModelSpec& s = model.spec();
  out << "dynembed-model 1\n"
      << "kind=" << to_string(s.kind) << "\n"
      << "n=" << s.n << "\n"
      << "lookback=" << s.lookback << "\n"
      << "embed_dim=" << s.embed_dim << "\n"
      << "encoder_widths=" << join(s.encoder_widths) << "\n"
      << "lstm_widths=" << join(s.lstm_widths) << "\n"
      << "decoder_widths=" << join(s.decoder_widths) << "\n"
      << "encoder_activation=" << nn::to_string(s.encoder_activation) << "\n"
      << "decoder_activation=" << nn::to_string(s.decoder_activation) << "\n"
      << "seed=" << model.seed() << "\n"
      << "---\n";
  nn::write_params(model.params(), out);
}

Model read_checkpoint(std::istream& in) {
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line) || line != "dynembed-model 1") {
    throw ParseError(line_no, "not a dynembed model checkpoint");
  }
  ModelSpec spec;
  std::uint64_t seed = 0;
  bool terminated = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line == "---") {
      terminated = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "kind") spec.kind = model_kind_from_string(value);
      else if (key == "n") spec.n = std::stoi(value);
      else if (key == "lookback") spec.lookback = std::stoi(value);
      else if (key == "embed_dim") spec.embed_dim = std::stoi(value);
      else if (key == "encoder_widths") spec.encoder_widths = split_ints(value, line_no);
      else if (key == "lstm_widths") spec.lstm_widths = split_ints(value, line_no);
      else if (key == "decoder_widths") spec.decoder_widths = split_ints(value, line_no);
      else if (key == "encoder_activation") spec.encoder_activation = nn::activation_from_string(value);
      else if (key == "decoder_activation") spec.decoder_activation = nn::activation_from_string(value);
      else if (key == "seed") seed = std::stoull(value);
      else throw ParseError(line_no, "unknown key '" + key + "'");
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(line_no, "bad value for " + key + ": " + e.what());
    }
  }
  if (!terminated) throw ParseError(line_no, "missing '---' separator");
  return Model(std::move(spec), seed, nn::read_params(in));
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_checkpoint(model, out);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace dynembed::models

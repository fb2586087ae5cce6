#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dynembed/graph.hpp"
#include "dynembed/linalg.hpp"
#include "dynembed/nn/params.hpp"
#include "dynembed/nn/tape.hpp"

namespace dynembed::models {

enum class ModelKind { kAE, kRNN, kAERNN };

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct ModelSpec {
  ModelKind kind = ModelKind::kAE;
  int n = 0;
  int lookback = 3;
  int embed_dim = 128;
  // Dense widths: the whole encoder for AE, the per-step pre-encoder for AERNN.
  std::vector<int> encoder_widths;
  // Stacked LSTM widths for RNN and AERNN.
  std::vector<int> lstm_widths;
  std::vector<int> decoder_widths;
  nn::Activation encoder_activation = nn::Activation::kRelu;
  nn::Activation decoder_activation = nn::Activation::kRelu;

  // Throws ArgumentError naming the offending field.
  void validate() const;
  // Number of entries in one input row fed to the first layer.
  int input_width() const { return kind == ModelKind::kAE ? n * lookback : n; }
};

// Default widths: AE [500, 300, d] / [300, 500, n]; RNN LSTM [500, 300, d];
// AERNN dense [500, 300], LSTM [d], decoder [300, 500, n].
ModelSpec default_spec(ModelKind kind, int n, int lookback, int embed_dim);

struct TrainConfig {
  double beta = 5.0;
  int epochs = 250;
  int batch_size = 100;
  nn::AdamConfig adam;
  std::uint64_t seed = 0;
  // Called after every epoch with (epoch index, mean batch loss).
  std::function<void(int, double)> on_epoch;

  void validate(int n) const;
};

struct TrainLog {
  std::vector<double> epoch_loss;
};

// Rows of a window for a batch of nodes, shaped for the model kind: AE gets a
// single batch x (n * lb) matrix of concatenated rows; RNN and AERNN get lb
// batch x n matrices in temporal order.
struct ArchitectureInput {
  std::vector<SparseMatrix> steps;
  Eigen::Index batch() const { return steps.empty() ? 0 : steps.front().rows(); }
};

ArchitectureInput get_architecture_input(std::span<const SparseMatrix> inputs, ModelKind kind,
                                         std::span<const int> nodes);
ArchitectureInput get_architecture_input(const graph::Window& window, ModelKind kind,
                                         std::span<const int> nodes);

// Copies the given rows of a sparse matrix into a dense batch.
Matrix gather_rows(const SparseMatrix& m, std::span<const int> rows);

struct ForwardVars {
  nn::Var embedding;   // batch x d
  nn::Var prediction;  // batch x n, sigmoid output
};

class Model {
 public:
  Model(ModelSpec spec, std::uint64_t seed);
  Model(ModelSpec spec, std::uint64_t seed, nn::ParamStore params);

  const ModelSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  ForwardVars forward(nn::Tape& tape, const ArchitectureInput& input);

  // Inference on frozen parameters; safe to call concurrently.
  Matrix embed_batch(const ArchitectureInput& input) const;
  Matrix predict_batch(const ArchitectureInput& input) const;

 private:
  ModelSpec spec_;
  std::uint64_t seed_;
  nn::ParamStore params_;
};

// Batch-averaged weighted reconstruction loss of the prediction against the
// dense target rows.
nn::Var batch_loss(nn::Tape& tape, Model& model, const ArchitectureInput& input,
                   const Matrix& target, double beta);

// Trains on every window whose target step lies in [t_lo, t_hi).
TrainLog train(Model& model, const graph::DynamicGraph& g, int t_lo, int t_hi,
               const TrainConfig& cfg);

// Y_t from the window of lb snapshots ending at t (requires t >= lb - 1).
Matrix embed(const Model& model, const graph::DynamicGraph& g, int t);
Matrix embed(const Model& model, std::span<const SparseMatrix> window);

// Predicted adjacency of step t + 1 from the window ending at t; symmetrized
// for undirected graphs, zero diagonal.
Matrix predict_next(const Model& model, const graph::DynamicGraph& g, int t);
Matrix predict_next(const Model& model, std::span<const SparseMatrix> window, bool directed);

// Text preamble (kind, sizes, widths, seed as key=value lines), a "---" line,
// then the binary parameter container.
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);
void write_checkpoint(const Model& model, std::ostream& out);
Model read_checkpoint(std::istream& in);

}  // namespace dynembed::models

#include "dynembed/nn/layers.hpp"

#include <cmath>

#include "dynembed/errors.hpp"

namespace dynembed::nn {

namespace {

constexpr double kForgetBias = 1.0;

Matrix glorot_uniform(int rows, int cols, int fan_in, int fan_out, Rng& rng) {
  const double limit = glorot_limit(fan_in, fan_out);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
  return m;
}

}  // namespace

double glorot_limit(int fan_in, int fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void init_dense(ParamStore& store, const std::string& name, int in, int out, Rng& rng) {
  if (in < 1 || out < 1) throw ArgumentError("dense layer '" + name + "' needs positive widths");
  store.add(name + "/weight", glorot_uniform(in, out, in, out, rng));
  store.add(name + "/bias", Matrix::Zero(1, out));
}

Var dense_forward(Tape& tape, ParamStore& store, const std::string& name, const Input& x,
                  Activation activation) {
  Var w = tape.param(store, name + "/weight");
  Var b = tape.param(store, name + "/bias");
  return tape.activate(tape.add_bias(tape.linear(x, w), b), activation);
}

void init_lstm(ParamStore& store, const std::string& name, int in, int hidden, Rng& rng) {
  if (in < 1 || hidden < 1) throw ArgumentError("LSTM layer '" + name + "' needs positive widths");
  store.add(name + "/kernel", glorot_uniform(in, 4 * hidden, in, 4 * hidden, rng));
  store.add(name + "/recurrent", glorot_uniform(hidden, 4 * hidden, hidden, 4 * hidden, rng));
  Matrix bias = Matrix::Zero(1, 4 * hidden);
  bias.middleCols(hidden, hidden).setConstant(kForgetBias);
  store.add(name + "/bias", std::move(bias));
}

LstmState lstm_zero_state(Tape& tape, Eigen::Index batch, Eigen::Index hidden) {
  return {tape.constant(Matrix::Zero(batch, hidden)), tape.constant(Matrix::Zero(batch, hidden))};
}

LstmState lstm_cell_forward(Tape& tape, ParamStore& store, const std::string& name,
                            const Input& x, const LstmState& prev) {
  Var kernel = tape.param(store, name + "/kernel");
  Var recurrent = tape.param(store, name + "/recurrent");
  Var bias = tape.param(store, name + "/bias");
  const Eigen::Index hidden = tape.value(recurrent).rows();
  if (tape.value(prev.h).cols() != hidden || tape.value(prev.c).cols() != hidden) {
    throw DimensionError("LSTM '" + name + "': state width does not match hidden size " +
                         std::to_string(hidden));
  }

  Var pre = tape.add_bias(
      tape.add(tape.linear(x, kernel), tape.matmul(prev.h, recurrent)), bias);
  Var input_gate = tape.sigmoid(tape.slice_cols(pre, 0, hidden));
  Var forget_gate = tape.sigmoid(tape.slice_cols(pre, hidden, hidden));
  Var candidate = tape.tanh(tape.slice_cols(pre, 2 * hidden, hidden));
  Var output_gate = tape.sigmoid(tape.slice_cols(pre, 3 * hidden, hidden));

  Var c = tape.add(tape.hadamard(forget_gate, prev.c), tape.hadamard(input_gate, candidate));
  Var h = tape.hadamard(output_gate, tape.tanh(c));
  return {h, c};
}

}  // namespace dynembed::nn

#pragma once

#include <string>

#include "dynembed/nn/params.hpp"
#include "dynembed/nn/tape.hpp"
#include "dynembed/random.hpp"

namespace dynembed::nn {

// Dense layer parameters: "<name>/weight" (in x out) and "<name>/bias" (1 x out).
void init_dense(ParamStore& store, const std::string& name, int in, int out, Rng& rng);

// f(x * W + b)
Var dense_forward(Tape& tape, ParamStore& store, const std::string& name, const Input& x,
                  Activation activation);

// LSTM parameters, gates stacked in the order input, forget, candidate, output:
//   "<name>/kernel"    (in x 4h)  acts on the layer input
//   "<name>/recurrent" (h x 4h)   acts on the previous hidden state
//   "<name>/bias"      (1 x 4h)
// Stacked, the recurrent and kernel blocks are the transposed gate matrices
// applied to the concatenation [h_{t-1}, x_t].
void init_lstm(ParamStore& store, const std::string& name, int in, int hidden, Rng& rng);

struct LstmState {
  Var h;
  Var c;
};

LstmState lstm_zero_state(Tape& tape, Eigen::Index batch, Eigen::Index hidden);

// One time step:
//   i = sig(W_i [h, x] + b_i)     f = sig(W_f [h, x] + b_f)
//   g = tanh(W_C [h, x] + b_C)    o = sig(W_o [h, x] + b_o)
//   c' = f * c + i * g            h' = o * tanh(c')
LstmState lstm_cell_forward(Tape& tape, ParamStore& store, const std::string& name,
                            const Input& x, const LstmState& prev);

// Uniform Glorot initialization bound.
double glorot_limit(int fan_in, int fan_out);

}  // namespace dynembed::nn

#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dynembed/linalg.hpp"
#include "dynembed/nn/params.hpp"

namespace dynembed::nn {

enum class Activation { kIdentity, kRelu, kSigmoid, kTanh };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  bool valid() const { return id_ >= 0; }
  int id() const { return id_; }

 private:
  friend class Tape;
  explicit Var(int id) : id_(id) {}
  int id_ = -1;
};

// A layer input: either a recorded dense value or a constant sparse matrix.
// Sparse inputs never receive gradients.
struct Input {
  Input(Var v) : var(v) {}  // NOLINT(google-explicit-constructor)
  Input(const SparseMatrix& m) : sparse(&m) {}  // NOLINT(google-explicit-constructor)

  Var var;
  const SparseMatrix* sparse = nullptr;
};

// Records matrix operations in execution order; backward() replays their
// derivative rules in reverse and accumulates parameter gradients into the
// owning ParamStore.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // The parameter is referenced, not copied; one node per name per tape.
  Var param(ParamStore& store, const std::string& name);

  const Matrix& value(Var v) const;
  // Gradient of the last backward() output with respect to v (zero if v did
  // not contribute).
  const Matrix& grad(Var v) const;

  Var matmul(Var a, Var b);     // a * b
  Var matmul(const SparseMatrix& x, Var w);
  Var matmul_nt(Var x, Var w);  // x * w^T
  Var linear(const Input& x, Var w);  // x * w
  Var add(Var a, Var b);
  Var add_bias(Var x, Var bias);  // bias is 1 x cols, broadcast over rows
  Var hadamard(Var a, Var b);
  Var scale(Var x, double factor);
  Var activate(Var x, Activation a);
  Var sigmoid(Var x) { return activate(x, Activation::kSigmoid); }
  Var tanh(Var x) { return activate(x, Activation::kTanh); }
  Var relu(Var x) { return activate(x, Activation::kRelu); }
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var x, Eigen::Index start, Eigen::Index count);
  // Sum over entries of B.*B.*(pred - target).^2 with B = beta on the
  // support of target and 1 elsewhere. Result is 1 x 1.
  Var weighted_recon_loss(Var pred, const Matrix& target, double beta);
  Var sum(Var x);

  // Runs reverse accumulation from a 1 x 1 output.
  void backward(Var output);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;  // parameter value, when a leaf param
    Param* param = nullptr;
    bool requires_grad = false;
    Matrix grad;
    std::function<void(Tape&, Node&)> backward;
  };

  const Matrix& val(int id) const;
  Matrix& grad_slot(int id);
  bool needs(int id) const { return nodes_[id].requires_grad; }
  Var push(Matrix value, bool requires_grad, std::function<void(Tape&, Node&)> backward);

  std::vector<Node> nodes_;
  std::unordered_map<const Param*, int> param_nodes_;
};

struct LossValue {
  double value = 0.0;
  Matrix gradient;  // dL/dpred
};

LossValue weighted_recon_loss(const Matrix& pred, const Matrix& target, double beta);

}  // namespace dynembed::nn
